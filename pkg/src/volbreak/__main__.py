import sys

from volbreak.cli import main

sys.exit(main())
