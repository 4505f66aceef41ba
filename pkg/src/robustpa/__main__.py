import sys

from robustpa.cli import main

sys.exit(main())
