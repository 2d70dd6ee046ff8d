import sys

from symrl.cli import main

sys.exit(main())
