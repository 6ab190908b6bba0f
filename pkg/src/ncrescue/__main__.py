import sys

from ncrescue.cli import main

sys.exit(main())
