from twingap.cli import main
import sys

sys.exit(main())
