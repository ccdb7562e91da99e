"""Thread-count policy shared by the parallel parts of the package."""

from __future__ import annotations

import os

ENV_VAR = "GAMMA_DAMAGE_THREADS"


def max_workers(default: int = 1) -> int:
    """Worker cap from ``GAMMA_DAMAGE_THREADS`` (at least 1)."""
    raw = os.environ.get(ENV_VAR)
    if raw is None or raw.strip() == "":
        return max(1, default)
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{ENV_VAR} must be an integer, got {raw!r}") from None
    return max(1, n)
