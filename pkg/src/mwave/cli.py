"""Command line front end.

``mwave <subcommand> ...``; see ``mwave --help`` for the exit-code table.
"""

import argparse
import os
import sys

import numpy as np

from mwave import design, dosimetry, fdtd, radar
from mwave.config import load_config, parse_config, parse_quantity
from mwave.errors import EXIT_CODES, MwaveError
from mwave.io import OutputSet, columns_csv_text, kv_text, matrix_csv_text, pgm_bytes
from mwave.phantom import build_phantom, rasterize

USAGE_EXIT = 2
IO_EXIT = 14

EPILOG = "exit codes:\n  0  success\n  1  unclassified error\n  2  usage error\n" + "".join(
    f"  {code:<2} {name}\n" for name, code in sorted(EXIT_CODES.items(), key=lambda kv: kv[1]) if code > 1
) + f"  {IO_EXIT} I/O error\n"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _quantity(kind):
    def conv(text):
        try:
            return parse_quantity(text, kind)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    conv.__name__ = kind
    return conv


def _config(args):
    if args.config is None:
        return parse_config("")
    return load_config(args.config)


def _threads(args):
    if args.threads:
        return args.threads
    return radar.default_threads()


def _report(pairs, args, name):
    text = kv_text(pairs)
    sys.stdout.write(text)
    if getattr(args, "out", None):
        with OutputSet(args.out) as out:
            out.add(name, text)


def cmd_design(args):
    if args.kind == "patch":
        d = design.design_rect_patch(args.f0, args.eps_r, args.h)
        rep = d.report()
        rep["resonance_check"] = f"{d.resonance() / 1e9:.4g} GHz"
    else:
        rep = design.design_monopole(args.fl, args.eps_r).report()
    _report(rep, args, f"design_{args.kind}.txt")
    return 0


def cmd_metrics(args):
    if args.kind == "vswr":
        gamma = design.s11_db_to_gamma(args.s11)
        vswr = design.gamma_to_vswr(gamma)
        _report({"s11_db": f"{args.s11:.4g}", "gamma": f"{gamma:.4g}", "vswr": f"{vswr:.4g}"}, args, "vswr.txt")
    else:
        curve = design.S11Curve.from_csv(args.csv)
        bands = design.bandwidth_at_threshold(curve, args.threshold)
        text = columns_csv_text(
            ["f_low_hz", "f_high_hz", "bandwidth_hz"],
            [[b[0] for b in bands], [b[1] for b in bands], [b[1] - b[0] for b in bands]],
            trailer=f"threshold_db = {args.threshold:.4g}",
        )
        sys.stdout.write(text)
        if args.out:
            with OutputSet(args.out) as out:
                out.add("bandwidth.csv", text)
    return 0


def _trace_csv(times, values):
    return columns_csv_text(["time_s", "ez_v_per_m"], [times, values])


def cmd_simulate(args):
    cfg = _config(args)
    scen = cfg.scenario()
    grid, phantom, raster = scen.validate()
    if args.no_tumor:
        phantom = build_phantom(scen.phantom_spec.without_tumor(), scen.catalog)
        raster = rasterize(phantom, grid)
    n_steps = scen.imaging_steps()
    array, nodes = scen.array().snapped(grid)
    with OutputSet(args.out) as out:
        out.add("raster_eps_r.csv", matrix_csv_text(raster.eps_r))
        out.add("raster_sigma.csv", matrix_csv_text(raster.sigma))
        for tx, node in enumerate(nodes):
            snaps = []
            every = args.snapshot_every if tx == 0 else None
            res = fdtd.run(raster, grid, [(node, scen.pulse)], nodes, n_steps,
                           snapshot_every=every, snapshot=lambda k, ez: snaps.append((k, ez.copy())))
            times = res.times()
            if tx == 0:
                out.add("tx_waveform.csv", columns_csv_text(
                    ["time_s", "source_v"], [fdtd.source_time(np.arange(n_steps), grid.dt), res.tx_waveform]))
            for rx in range(len(nodes)):
                out.add(os.path.join("traces", f"tx{tx:02d}_rx{rx:02d}.csv"), _trace_csv(times, res.traces[rx]))
            for k, ez in snaps:
                if args.snapshot_format == "pgm":
                    out.add(os.path.join("snapshots", f"ez_{k:06d}.pgm"), pgm_bytes(ez))
                else:
                    out.add(os.path.join("snapshots", f"ez_{k:06d}.csv"), matrix_csv_text(ez))
        out.add("elements.csv", columns_csv_text(["x_m", "y_m"], [array.positions[:, 0], array.positions[:, 1]]))
    return 0


def cmd_image(args):
    cfg = _config(args)
    scen = cfg.scenario()
    result = scen.run_imaging(threads=_threads(args))
    spec = scen.phantom_spec
    with OutputSet(args.out) as out:
        out.add("energy.csv", matrix_csv_text(result.image.values))
        out.add("energy.pgm", pgm_bytes(result.image.values))
        out.add("detection.txt", kv_text(result.detection.report(
            truth=spec.tumor_center(), inner_radius=spec.breast_radius, center=spec.center)))
    return 0


def cmd_sweep(args):
    cfg = _config(args)
    scen = cfg.sweep_scenario()
    res = radar.depth_sweep(cfg["sweep"]["depths"], scen, threads=_threads(args))
    d = np.array([r[0] for r in res])
    e = np.array([r[1] for r in res])
    trailer = None
    if len(res) >= 2 and np.all(np.isfinite(e)):
        slope = -np.polyfit(d * 100.0, e, 1)[0]
        trailer = f"slope_db_per_cm = {slope:.9e}"
    with OutputSet(args.out) as out:
        out.add("sweep.csv", columns_csv_text(["depth_m", "energy_db"], [d, e], trailer))
    return 0


def cmd_sar(args):
    cfg = _config(args)
    s = cfg["sweep"]
    scen = cfg.scenario()
    results = dosimetry.frequency_scan(s["sar_freqs"], scen, amplitude=s["sar_amplitude"],
                                       ramp_periods=s["sar_ramp_periods"],
                                       measure_periods=s["sar_measure_periods"])
    best = dosimetry.select_frequency(results)
    chosen = next(r for r in results if r.freq == best)
    with OutputSet(args.out) as out:
        out.add("sar.csv", matrix_csv_text(chosen.sar_with.values))
        out.add("sar.pgm", pgm_bytes(chosen.sar_with.values))
        out.add("sar_diff.csv", columns_csv_text(
            ["freq_hz", "diff_sar"], [[r.freq for r in results], [r.diff_sar for r in results]],
            trailer=f"best_freq_hz = {best:.9e}"))
    return 0


def build_parser():
    p = _Parser(prog="mwave", description="Microwave breast imaging toolkit.",
                epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--threads", type=int, default=0,
                   help="worker cap for per-transmitter runs (default: $MWAVE_THREADS or 1)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("design", help="antenna sizing calculators")
    dsub = d.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    patch = dsub.add_parser("patch", help="rectangular microstrip patch")
    patch.add_argument("--f0", type=_quantity("freq"), required=True)
    patch.add_argument("--eps-r", type=float, required=True)
    patch.add_argument("--h", type=_quantity("length"), required=True)
    patch.add_argument("--out")
    mono = dsub.add_parser("monopole", help="printed UWB monopole")
    mono.add_argument("--fl", type=_quantity("freq"), required=True)
    mono.add_argument("--eps-r", type=float, required=True)
    mono.add_argument("--out")
    d.set_defaults(func=cmd_design)

    m = sub.add_parser("metrics", help="return loss / VSWR / bandwidth")
    msub = m.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    v = msub.add_parser("vswr", help="VSWR from S11 in dB")
    v.add_argument("--s11", type=_quantity("db"), required=True)
    v.add_argument("--out")
    b = msub.add_parser("bandwidth", help="bands below a threshold from a (freq_hz, s11_db) CSV")
    b.add_argument("--csv", required=True)
    b.add_argument("--threshold", type=_quantity("db"), default=-10.0)
    b.add_argument("--out")
    m.set_defaults(func=cmd_metrics)

    for name, func, helptext in (
        ("simulate", cmd_simulate, "multistatic FDTD acquisition, traces as CSV"),
        ("image", cmd_image, "calibrated DAS image and tumor detection"),
        ("sweep-depth", cmd_sweep, "normalized tumor response energy vs depth"),
        ("sar", cmd_sar, "SAR maps and differential-SAR frequency selection"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", help="run configuration file (defaults if omitted)")
        sp.add_argument("--out", required=True, help="output directory")
        sp.set_defaults(func=func)
        if name == "simulate":
            sp.add_argument("--no-tumor", action="store_true", help="simulate the calibration scene")
            sp.add_argument("--snapshot-every", type=int, default=None)
            sp.add_argument("--snapshot-format", choices=("csv", "pgm"), default="csv")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MwaveError as exc:
        print(f"mwave: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"mwave: I/O error: {exc}", file=sys.stderr)
        return IO_EXIT
    except ValueError as exc:
        print(f"mwave: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
