"""smectic-gsav - command-line entry point."""
import logging
import sys
from typing import Optional

from pythonjsonlogger import jsonlogger

from smectic.config import get_settings
from smectic.cli.router import build_parser
import smectic.metrics  # noqa: F401  registers custom metrics

logger = logging.getLogger(__name__)


def configure_logging():
    """Structured JSON logs on stderr; SMECTIC_LOG_JSON=false switches to plain text."""
    settings = get_settings()
    handler = logging.StreamHandler(sys.stderr)
    if settings.log_json:
        handler.setFormatter(jsonlogger.JsonFormatter(
            fmt="%(asctime)s %(name)s %(levelname)s %(message)s",
            rename_fields={"asctime": "timestamp", "levelname": "level"},
        ))
    else:
        handler.setFormatter(logging.Formatter("%(asctime)s %(name)s %(levelname)s %(message)s"))
    logging.root.handlers = [handler]
    logging.root.setLevel(settings.log_level.upper())


def main(argv: Optional[list[str]] = None) -> int:
    configure_logging()
    settings = get_settings()
    args = build_parser().parse_args(argv)
    logger.info(f"Starting {settings.app_name} v{settings.version}: {args.command}", extra={"component": "cli"})
    return args.handler(args.config, args.overrides)


if __name__ == "__main__":
    sys.exit(main())
