import logging
import os
import sys

if 'data_env' not in os.environ.keys():
    print("'data_env' not found in environment. Defaulting to 'sandbox' env.", file=sys.stderr)
env = os.environ.get('data_env', 'sandbox')

log_level = os.environ.get('log_level', 'INFO').upper()

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def get_logger(name: str, level: str | None = None) -> logging.Logger:
    """
    Return a logger with the repo-wide stderr handler installed on the root logger.

    The handler is added once; later calls only adjust the level when one is given.
    """
    root = logging.getLogger()
    if not any(getattr(h, '_hms_handler', False) for h in root.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._hms_handler = True
        root.addHandler(handler)
        root.setLevel(log_level)
    if level is not None:
        root.setLevel(level.upper())
    return logging.getLogger(name)
