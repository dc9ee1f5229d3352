import sys

from rewardmap.main import main

if __name__ == "__main__":
    sys.exit(main())
