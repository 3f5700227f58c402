import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "backend"))

import cli


def main():
    return cli.main()


if __name__ == "__main__":
    raise SystemExit(main())
