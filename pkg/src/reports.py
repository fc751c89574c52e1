"""
Артефакты прогона и свипа: manifest.json, ledger.csv, windows.csv, fields/r_<step>.csv, table.csv.

Все CSV пишутся через pandas с фиксированным порядком колонок.
"""
from __future__ import annotations
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional
import json
import logging

import numpy as np
import pandas as pd

from src.diagnostics_energy import LEDGER_COLUMNS, Verdict
from src.errors import OutputExistsError
from src.splitting_driver import WINDOW_COLUMNS
from src.utils import _now_utc, git_describe, to_json_serializable

logger = logging.getLogger(__name__)


def ensure_out_dir(out: str | Path, force: bool = False) -> Path:
    """Создаёт каталог вывода; непустой существующий каталог без force — ошибка"""
    p = Path(out)
    if p.exists() and not p.is_dir():
        raise OutputExistsError(f"output path is not a directory: {p}", path=str(p))
    if p.exists() and any(p.iterdir()) and not force:
        raise OutputExistsError(f"output directory is not empty: {p} (use --force)", path=str(p))
    p.mkdir(parents=True, exist_ok=True)
    return p


def write_csv(df: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        df.to_csv(f, index=False, float_format="%.17g")
    return path


def write_json(payload: Dict[str, Any], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_json_serializable(payload), f, indent=2, ensure_ascii=False, sort_keys=False)
        f.write("\n")
    return path


def verdicts_payload(verdicts: Iterable[Verdict]) -> List[Dict[str, Any]]:
    return [v.as_dict() for v in verdicts]


def field_frame(r: np.ndarray, quad) -> pd.DataFrame:
    """Плотность по ячейкам в длинном формате x, z, r"""
    X, Z = np.meshgrid(quad.cell_x, quad.cell_z, indexing="ij")
    return pd.DataFrame({"x": X.ravel(), "z": Z.ravel(), "r": np.asarray(r).ravel()})


def run_manifest(result, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    cfg = result.config
    manifest = {
        "status": result.status,
        "created_at": _now_utc().isoformat(),
        "build": git_describe(),
        "config": cfg.model_dump(),
        "summary": result.summary(),
        "verdicts": verdicts_payload(result.verdicts),
        "admissibility": verdicts_payload(result.admissibility),
        "lifespan": result.lifespan,
        "collision": result.collision,
        "stats": {
            "E0": result.stats.E0,
            "c_star": result.stats.c_star,
            "density_min": result.stats.density_min,
            "density_max": result.stats.density_max,
            "operator_norm": result.stats.operator_norm,
            "min_J": result.stats.min_J,
            "korn_sampled": result.stats.korn_sampled,
        },
    }
    manifest.update(extra or {})
    return manifest


def save_run(result, out_dir: Path) -> Dict[str, Path]:
    """Пишет все артефакты прогона в out_dir (каталог должен быть подготовлен ensure_out_dir)"""
    out_dir = Path(out_dir)
    paths: Dict[str, Path] = {}
    ledger = pd.DataFrame(result.ledger_rows()).reindex(columns=LEDGER_COLUMNS)
    paths["ledger"] = write_csv(ledger, out_dir / "ledger.csv")
    windows = pd.DataFrame([w.as_row() for w in result.windows]).reindex(columns=WINDOW_COLUMNS)
    paths["windows"] = write_csv(windows, out_dir / "windows.csv")
    for step, r in sorted(result.snapshots.items()):
        write_csv(field_frame(r, result.quad), out_dir / "fields" / f"r_{step:06d}.csv")
    paths["manifest"] = write_json(run_manifest(result), out_dir / "manifest.json")
    logger.info(f"[reports] run artifacts saved to {out_dir} ({len(result.windows)} windows, {len(result.snapshots)} fields)")
    return paths


def save_sweep(table: pd.DataFrame, manifest: Dict[str, Any], out_dir: Path) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    paths = {
        "table": write_csv(table, out_dir / "table.csv"),
        "manifest": write_json({"created_at": _now_utc().isoformat(), "build": git_describe(), **manifest}, out_dir / "manifest.json"),
    }
    logger.info(f"[reports] sweep table saved to {paths['table']} ({len(table)} rows)")
    return paths
