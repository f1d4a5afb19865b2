import sys

from labelfusion.cli import main

sys.exit(main())
