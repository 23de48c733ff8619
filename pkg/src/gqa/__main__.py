import sys

from gqa.harness.cli import main

sys.exit(main())
