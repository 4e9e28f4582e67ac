"""Allow running the suite from a fresh checkout without installing."""

import importlib.util
import sys
from pathlib import Path

if importlib.util.find_spec("coxerr") is None:
    sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
