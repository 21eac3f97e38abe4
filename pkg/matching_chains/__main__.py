import sys

from matching_chains.cli import main

sys.exit(main())
