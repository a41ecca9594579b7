"""Worker-count handling; EXPFUN_THREADS caps the pool size."""

import os


def worker_count() -> int:
    raw = os.environ.get("EXPFUN_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            return 1
    return min(4, os.cpu_count() or 1)
