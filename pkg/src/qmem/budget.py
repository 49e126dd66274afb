"""Resource budgets shared by the enumeration-heavy operations."""

from __future__ import annotations

import os

DEFAULT_BUDGET = 2_000_000


class BudgetExceeded(RuntimeError):
    """Raised when an exact computation would exceed its resource budget."""


def default_budget() -> int:
    """Budget from ``QMEM_BUDGET`` if set, else :data:`DEFAULT_BUDGET`."""
    raw = os.environ.get("QMEM_BUDGET")
    if raw is None or raw.strip() == "":
        return DEFAULT_BUDGET
    value = int(raw)
    if value <= 0:
        raise ValueError(f"QMEM_BUDGET must be positive, got {raw!r}")
    return value
