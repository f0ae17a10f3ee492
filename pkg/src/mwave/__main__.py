import sys

from mwave.cli import main

sys.exit(main())
