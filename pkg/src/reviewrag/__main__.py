import sys

from reviewrag.cli import main

sys.exit(main())
