"""
Общие утилиты для всего приложения
"""
from __future__ import annotations
from datetime import datetime, timezone as _tz
from pathlib import Path
from typing import Any, Dict
import json
import subprocess

import numpy as np
import pandas as pd


def _now_utc() -> datetime:
    """Текущее время в UTC"""
    return datetime.now(_tz.utc)


def deep_merge(base: dict, updates: dict) -> dict:
    """
    Рекурсивно мёрджит словари: вложенные dict-ы объединяются, остальные значения перезаписываются.
    Списки НЕ склеиваются — второе значение полностью заменяет первое.
    """
    out = dict(base or {})
    for k, v in (updates or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def _parse_scalar(raw: str) -> Any:
    """Значение из key = value: bool / int / float / список через запятую / строка"""
    s = raw.strip()
    if not s:
        return ""
    low = s.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("null", "none"):
        return None
    if s.startswith("[") or s.startswith("{"):
        return json.loads(s)
    if "," in s:
        return [_parse_scalar(p) for p in s.split(",") if p.strip()]
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s.strip("\"'")


def set_dotted(tree: dict, dotted: str, value: Any) -> dict:
    """tree['a']['b']['c'] = value для ключа 'a.b.c'"""
    parts = [p for p in dotted.split(".") if p]
    if not parts:
        raise ValueError(f"empty key: {dotted!r}")
    node = tree
    for p in parts[:-1]:
        nxt = node.setdefault(p, {})
        if not isinstance(nxt, dict):
            raise ValueError(f"key {dotted!r} conflicts with scalar at {p!r}")
        node = nxt
    node[parts[-1]] = value
    return tree


def parse_dotted_text(text: str) -> dict:
    """
    Плоский формат конфига: по одной паре `section.key = value` на строку.
    `#` начинает комментарий. Пустые строки игнорируются, повтор ключа считается ошибкой.
    """
    tree: dict = {}
    seen: set[str] = set()
    for lineno, line in enumerate((text or "").splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = body.split("=", 1)
        key = key.strip()
        if key in seen:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        set_dotted(tree, key, _parse_scalar(raw))
    return tree


def load_config_tree(path: str | Path) -> dict:
    """JSON или dotted key = value — по содержимому файла"""
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return json.loads(text)
    return parse_dotted_text(text)


def flatten_dotted(tree: dict, prefix: str = "") -> Dict[str, Any]:
    """Обратная операция к parse_dotted_text (для манифеста и таблиц свипа)"""
    out: Dict[str, Any] = {}
    for k, v in (tree or {}).items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten_dotted(v, key + "."))
        else:
            out[key] = v
    return out


def to_json_serializable(obj: Any) -> Any:
    """numpy/pandas типы -> чистый JSON"""
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        val = float(obj)
        return val if np.isfinite(val) else str(val)
    if isinstance(obj, float):
        return obj if np.isfinite(obj) else str(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [to_json_serializable(x) for x in obj.tolist()]
    if isinstance(obj, pd.Timestamp):
        return obj.isoformat()
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): to_json_serializable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_json_serializable(item) for item in obj]
    return obj


def git_describe() -> str:
    """Версия сборки для манифеста; вне git-репозитория — 'unknown'"""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parents[1],
            capture_output=True,
            text=True,
            timeout=5,
        )
        return out.stdout.strip() or "unknown"
    except Exception:
        return "unknown"
