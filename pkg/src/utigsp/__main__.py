import sys

from utigsp.cli import main

sys.exit(main())
