import sys

from vanet_twohop.cli import main

sys.exit(main())
