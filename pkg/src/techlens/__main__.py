import sys

from techlens.cli import main

sys.exit(main())
