import sys

from mmshare.cli import main

sys.exit(main())
