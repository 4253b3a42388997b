import sys

from zonalmc.cli import main

sys.exit(main())
