import sys

from gossipopt.cli import main

sys.exit(main())
