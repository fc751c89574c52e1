#!/usr/bin/env python3
"""
Точка входа fsisplit без установки пакета.

Примеры:
  python scripts/fsisplit.py run --config configs/demo.cfg --out artifacts/demo
  python scripts/fsisplit.py sweep --plan configs/sweep_dt.cfg --out artifacts/sweep_dt --jobs 4
  python scripts/fsisplit.py check
  python scripts/fsisplit.py bases --config configs/demo.cfg
"""

import sys
from pathlib import Path

# Добавляем src в путь
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
