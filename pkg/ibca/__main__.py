import sys

from ibca.app import main

sys.exit(main())
