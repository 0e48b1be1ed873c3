import logging
import sys

from app.core.config import settings


def setup_logging():
    # stdout belongs to the ASCII grid preview
    logging.basicConfig(
        level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[
            logging.StreamHandler(sys.stderr)
        ]
    )
    return logging.getLogger("aaa_mdp")

logger = setup_logging()
