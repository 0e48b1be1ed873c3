import sys
from pathlib import Path
sys.path.append(str(Path(__file__).parent.absolute()))

from app.cli import main

if __name__ == "__main__":
    sys.exit(main())
