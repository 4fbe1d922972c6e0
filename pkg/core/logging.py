import logging

from rich.console import Console
from rich.logging import RichHandler

from core.config import settings


def setup_logging(level: str | int = settings.LOG_LEVEL) -> None:
    """Route all toolkit loggers through a rich handler on stderr."""
    handler = RichHandler(
        console=Console(stderr=True),
        show_path=False,
        rich_tracebacks=True,
        markup=False,
    )
    logging.basicConfig(
        level=level,
        format="%(name)s: %(message)s",
        datefmt="[%X]",
        handlers=[handler],
        force=True,
    )
