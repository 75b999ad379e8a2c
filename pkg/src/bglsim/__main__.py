import sys

from bglsim.cli import main

sys.exit(main())
