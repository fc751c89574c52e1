"""
Логирование fsisplit: файл + stderr, контекст прогона в каждой записи.

Основные функции:
- setup_logging() - обработчики на логгере "src" (повторный вызов не дублирует их)
- log_context() - контекст run/window для записей внутри блока with
- current_context() - текущие значения контекста
"""
from __future__ import annotations
from contextlib import contextmanager
from contextvars import ContextVar
from pathlib import Path
from typing import Dict, Iterator, Optional
import logging

from src.config import settings

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s {run=%(run)s window=%(window)s}: %(message)s"
_MARK = "_fsisplit_handler"

_run: ContextVar[str] = ContextVar("fsisplit_run", default="-")
_window: ContextVar[str] = ContextVar("fsisplit_window", default="-")


class RunContextFilter(logging.Filter):
    """Добавляет в запись поля run и window из текущего контекста"""

    def filter(self, record: logging.LogRecord) -> bool:
        record.run = _run.get()
        record.window = _window.get()
        return True


def current_context() -> Dict[str, str]:
    return {"run": _run.get(), "window": _window.get()}


@contextmanager
def log_context(run: Optional[str] = None, window: Optional[int] = None) -> Iterator[None]:
    """Поля, не переданные явно, наследуются от внешнего контекста"""
    tokens = []
    if run is not None:
        tokens.append((_run, _run.set(str(run))))
    if window is not None:
        tokens.append((_window, _window.set(str(window))))
    try:
        yield
    finally:
        for var, token in reversed(tokens):
            var.reset(token)


def _handler(h: logging.Handler, level: int) -> logging.Handler:
    h.setLevel(level)
    h.setFormatter(logging.Formatter(LOG_FORMAT))
    h.addFilter(RunContextFilter())
    setattr(h, _MARK, True)
    return h


def setup_logging(
    name: str = "",
    log_file: Optional[Path] = None,
    level: Optional[str] = None,
    stream: bool = True,
) -> logging.Logger:
    """
    Обработчики вешаются на логгер пакета "src" (все модули пишут через
    logging.getLogger(__name__)); старые обработчики fsisplit заменяются.
    """
    log_file = Path(log_file) if log_file is not None else Path(settings.LOG_DIR) / "fsisplit.log"
    level_name = (level or settings.LOG_LEVEL).upper()
    lvl = getattr(logging, level_name, logging.INFO)

    root = logging.getLogger("src")
    for h in [h for h in root.handlers if getattr(h, _MARK, False)]:
        root.removeHandler(h)
        h.close()
    log_file.parent.mkdir(parents=True, exist_ok=True)
    root.addHandler(_handler(logging.FileHandler(log_file, encoding="utf-8"), lvl))
    if stream:
        root.addHandler(_handler(logging.StreamHandler(), lvl))
    root.setLevel(lvl)

    logger = root.getChild(name) if name else root
    logger.debug(f"[logging] initialized (level={level_name}, file={log_file})")
    return logger
