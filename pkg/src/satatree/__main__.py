import sys

from satatree.cli import main

sys.exit(main())
