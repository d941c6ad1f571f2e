"""Loads Environment Variables"""

import os
from dotenv import load_dotenv

load_dotenv()

BASE_DIR = os.environ.get("MEMNO_BASE_DIR", "./memno_results")

# caps trajectory-level and suite-level worker threads
MEMNO_THREADS = int(os.environ.get("MEMNO_THREADS", os.cpu_count() or 1))

LOG_LEVEL = os.environ.get("MEMNO_LOG_LEVEL", "INFO")

DEFAULT_SEED = int(os.environ.get("MEMNO_SEED", "0"))


def thread_count() -> int:
    """Returns the worker cap, re-reading MEMNO_THREADS so late overrides apply."""

    raw = os.environ.get("MEMNO_THREADS")
    if raw is None:
        return max(1, MEMNO_THREADS)
    return max(1, int(raw))
