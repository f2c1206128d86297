import sys

from testreuse.cli import main

sys.exit(main())
