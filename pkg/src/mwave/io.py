"""Output writers: CSV matrices/columns, 8-bit PGM and key = value reports.

All numeric CSV fields use ``%.8e`` (9 significant digits). Files are
staged under temporary names by :class:`OutputSet` and renamed only once
every file of a run has been written.
"""

import os
import tempfile

import numpy as np

FLOAT_FMT = "%.8e"


def format_float(x):
    return FLOAT_FMT % x


def matrix_csv_text(values):
    """Rows are the second array index (y), columns the first (x)."""
    rows = np.asarray(values, dtype=float).T
    return "".join(",".join(FLOAT_FMT % v for v in row) + "\n" for row in rows)


def columns_csv_text(header, columns, trailer=None):
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(FLOAT_FMT % v for v in row))
    if trailer:
        lines.append(f"# {trailer}")
    return "\n".join(lines) + "\n"


def kv_text(pairs):
    return "".join(f"{k} = {v}\n" for k, v in pairs.items())


def pgm_bytes(values):
    """Binary PGM with the top row at the largest y.

    Non-negative data maps linearly with the peak at 255; signed data maps
    its min..max range onto 0..255.
    """
    v = np.asarray(values, dtype=float).T[::-1]
    lo, hi = float(v.min()), float(v.max())
    if lo >= 0:
        scaled = v / hi * 255.0 if hi > 0 else np.zeros_like(v)
    else:
        scaled = (v - lo) / (hi - lo) * 255.0
    pix = np.clip(np.rint(scaled), 0, 255).astype(np.uint8)
    h, w = pix.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pix.tobytes()


class OutputSet:
    """Stage several output files and publish them together.

    Use as a context manager; on error every staged file is removed and
    nothing appears under its final name.
    """

    def __init__(self, out_dir):
        self.out_dir = out_dir
        self._staged = []

    def __enter__(self):
        os.makedirs(self.out_dir, exist_ok=True)
        return self

    def add(self, name, data):
        final = os.path.join(self.out_dir, name)
        os.makedirs(os.path.dirname(final), exist_ok=True)
        if isinstance(data, str):
            data = data.encode("utf-8")
        fd, tmp = tempfile.mkstemp(prefix=".partial-", dir=os.path.dirname(final))
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        self._staged.append((tmp, final))
        return final

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            for tmp, final in self._staged:
                os.replace(tmp, final)
        else:
            for tmp, _ in self._staged:
                try:
                    os.remove(tmp)
                except OSError:
                    pass
        self._staged = []
        return False
