"""Group attribute ratios, balance, and balance-bound count windows."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .cohort import AttributeTable
from .errors import EmptyGroup
from .pairs import pair_index

WINDOW_EPS = 1e-9


@dataclass(frozen=True)
class BalanceRecord:
    group_id: int
    attribute: str
    group_ratio: float
    population_ratio: float
    balance: float

    def to_dict(self):
        return asdict(self)


def balance(a_cs: float, a_s: float) -> float:
    """min(R, 1/R) for R = a_cs / a_s.

    1.0 when both ratios are zero, 0.0 when exactly one is.
    """
    if a_cs == 0 and a_s == 0:
        return 1.0
    if a_cs == 0 or a_s == 0:
        return 0.0
    # min(R, 1/R) as one division, so the result is exactly symmetric
    return min(a_cs, a_s) / max(a_cs, a_s)


def group_ratio(assignment: Sequence[int], attrs: AttributeTable, s: str, c: int) -> float:
    """Share of group ``c`` members carrying attribute ``s``."""
    col = attrs.column(s)
    members = np.flatnonzero(np.asarray(assignment) == c)
    if members.size == 0:
        raise EmptyGroup(f"group {c} has no members")
    return int(col[members].sum()) / members.size


def vertex_group_ratio(w, n: int, attrs: AttributeTable, s: str, m: int) -> float:
    """Attribute share of the group containing ``m``, read off the pair vector.

    Counts attributed neighbours of ``m`` (pairs with ``w = 1``) plus ``m``
    itself, over the number of such neighbours plus one.
    """
    col = attrs.column(s)
    hits = int(col[m])
    size = 1
    for k in range(n):
        if k != m and w[pair_index(m, k, n)]:
            size += 1
            hits += int(col[k])
    return hits / size


def count_window(group_size: int, a_s: float, B_L: float):
    """Admissible attributed-member counts for a group of ``group_size``.

    Returns an inclusive ``(lo, hi)`` pair, or ``None`` if no integer count
    keeps the group's balance at or above ``B_L``.
    """
    g = int(group_size)
    if g < 1:
        raise ValueError(f"group size must be >= 1, got {group_size}")
    if B_L <= 0:
        return (0, g)
    lo = math.ceil(B_L * a_s * g - WINDOW_EPS)
    hi = math.floor(min(1.0, a_s / B_L) * g + WINDOW_EPS)
    lo = max(lo, 0)
    hi = min(hi, g)
    if lo > hi:
        return None
    return (lo, hi)


def balance_records(assignment: Sequence[int], attrs: AttributeTable,
                    attributes: Sequence[str] | None = None) -> list:
    assignment = np.asarray(assignment)
    names = list(attrs.names if attributes is None else attributes)
    k = int(assignment.max()) + 1 if assignment.size else 0
    out = []
    for c in range(k):
        for s in names:
            a_s = int(attrs.column(s).sum()) / attrs.n
            a_cs = group_ratio(assignment, attrs, s, c)
            out.append(BalanceRecord(c, s, a_cs, a_s, balance(a_cs, a_s)))
    return out
