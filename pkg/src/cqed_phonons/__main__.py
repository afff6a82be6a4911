import sys

from cqed_phonons.cli import main

sys.exit(main())
