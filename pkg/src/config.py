from __future__ import annotations
from functools import lru_cache
from pathlib import Path
import os

# python-dotenv подхватывает .env из корня проекта
try:
    from dotenv import load_dotenv

    load_dotenv(dotenv_path=Path(__file__).resolve().parents[1] / ".env")
except Exception:
    pass

PROJECT_ROOT = Path(__file__).resolve().parents[1]


class Settings:
    ENV: str
    LOG_DIR: Path
    LOG_LEVEL: str
    ARTIFACTS_DIR: Path
    FSI_JOBS: int
    SENTRY_DSN: str | None

    def __init__(self):
        self.ENV = os.getenv("FSI_ENV", "dev")

        self.LOG_DIR = Path(os.getenv("LOG_DIR", PROJECT_ROOT / "logs"))
        self.LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()
        self.ARTIFACTS_DIR = Path(os.getenv("ARTIFACTS_DIR", PROJECT_ROOT / "artifacts"))

        # 0 = по числу CPU (joblib n_jobs=-1)
        self.FSI_JOBS = int(os.getenv("FSI_JOBS", "0"))
        self.SENTRY_DSN = os.getenv("SENTRY_DSN") or None

        # гарантируем существование папок
        self.LOG_DIR.mkdir(parents=True, exist_ok=True)
        self.ARTIFACTS_DIR.mkdir(parents=True, exist_ok=True)

    @property
    def sweep_jobs(self) -> int:
        """Число воркеров для joblib (-1 = все ядра)"""
        return self.FSI_JOBS if self.FSI_JOBS > 0 else -1


@lru_cache()
def get_settings() -> Settings:
    return Settings()


# Удобный единый импорт
settings = get_settings()
