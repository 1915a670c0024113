import sys

from goqsm.cli import main

sys.exit(main())
