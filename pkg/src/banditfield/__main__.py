import sys

from banditfield.cli import main


sys.exit(main())
