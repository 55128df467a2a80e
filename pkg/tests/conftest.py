import sys
from pathlib import Path

# make the frozen oracle helpers importable from any working directory
sys.path.insert(0, str(Path(__file__).resolve().parent))
