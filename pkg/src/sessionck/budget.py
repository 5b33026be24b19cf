"""State-space budgets shared by the search procedures."""

from __future__ import annotations

import os

DEFAULT_BUDGET = 2_000_000


class BudgetExceeded(RuntimeError):
    pass


def state_budget() -> int:
    """The state cap from ``SESSIONCK_BUDGET``, or the default."""
    raw = os.environ.get("SESSIONCK_BUDGET")
    return int(raw) if raw else DEFAULT_BUDGET
