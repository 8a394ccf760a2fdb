import sys

from causal_ssm.cli import main

sys.exit(main())
