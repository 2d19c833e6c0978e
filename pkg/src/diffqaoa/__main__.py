import sys

from diffqaoa.cli import main

sys.exit(main())
