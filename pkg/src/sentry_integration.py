"""
Sentry для отслеживания сбоев прогонов.

Включается только при заданном SENTRY_DSN; без него все функции — no-op.
Логи уровня ERROR уходят событиями, INFO и выше — breadcrumbs.
"""
import logging

from src.config import settings

logger = logging.getLogger(__name__)


def init_sentry(component: str = "cli") -> bool:
    """Инициализирует sentry-sdk; возвращает False, если DSN не задан или SDK недоступен"""
    sentry_dsn = settings.SENTRY_DSN

    if not sentry_dsn:
        logger.debug("[sentry] SENTRY_DSN not set, error tracking disabled")
        return False

    try:
        import sentry_sdk
        from sentry_sdk.integrations.logging import LoggingIntegration

        logging_integration = LoggingIntegration(
            level=logging.INFO,  # breadcrumbs
            event_level=logging.ERROR,  # события
        )
        sentry_sdk.init(
            dsn=sentry_dsn,
            environment=settings.ENV,
            integrations=[logging_integration],
            ignore_errors=[KeyboardInterrupt, SystemExit],
            max_breadcrumbs=50,
            attach_stacktrace=True,
        )
        sentry_sdk.set_tag("service", "fsisplit")
        sentry_sdk.set_tag("component", component)
        logger.info(f"[sentry] Initialized (env={settings.ENV})")
        return True

    except ImportError:
        logger.warning("[sentry] sentry-sdk not installed, error tracking disabled")
        return False

    except Exception as e:
        logger.error(f"[sentry] Failed to initialize: {e}")
        return False


def capture_exception(error: Exception, context: dict | None = None) -> None:
    """Ручная отправка исключения (например, с номером окна и путём конфига)"""
    try:
        import sentry_sdk

        with sentry_sdk.push_scope() as scope:
            for key, value in (context or {}).items():
                scope.set_extra(key, value)
            sentry_sdk.capture_exception(error)

    except Exception as e:
        logger.debug(f"[sentry] Failed to capture exception: {e}")
