"""Package logger. Records carry the execution backend they concern in the `backend` field,
"-" when they concern none; use `backend_logger` to tag records from engine objects.
"""

import logging
import sys


class BackendFieldFilter(logging.Filter):
    """Default the `backend` field of untagged records."""

    def filter(self, record: logging.LogRecord) -> bool:
        if not hasattr(record, "backend"):
            record.backend = "-"
        return True


def backend_logger(backend_name: str) -> logging.LoggerAdapter:
    """Package logger whose records name `backend_name` in the `backend` field."""
    return logging.LoggerAdapter(logger, {"backend": backend_name})


logger = logging.getLogger("fdl_auralizer")
logger.setLevel(logging.DEBUG)
handler = logging.StreamHandler(sys.stderr)
handler.setLevel(logging.INFO)
handler.addFilter(BackendFieldFilter())
formatter = logging.Formatter(
    "%(asctime)s - %(name)s - %(levelname)s - [%(backend)s] %(message)s"
)
handler.setFormatter(formatter)
logger.addHandler(handler)
