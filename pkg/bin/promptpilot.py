from pathlib import Path
import sys
sys.path.append(str(Path(__file__).resolve().parent.parent))
from promptpilot.cli import main


if __name__ == "__main__":
    # logging setup, the Windows loop policy and asyncio.run all happen in `main`
    sys.exit(main())
