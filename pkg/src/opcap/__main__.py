import sys

from opcap.cli import main

sys.exit(main())
