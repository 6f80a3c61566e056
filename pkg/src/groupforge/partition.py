"""Exact size- and balance-constrained partitioning of the distance graph.

Students are vertices of a complete graph whose edge weights are their
embedding distances. A partition is scored by the total distance over
same-group pairs, and the solver maximizes (or minimizes) that score
subject to group-size bounds and per-attribute balance lower bounds.

The search assigns students to groups in index order, so triangle
closure holds by construction; the pair-indicator vector is materialized
afterwards for validation and reporting.
"""

from __future__ import annotations

import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .cohort import AttributeTable
from .errors import (
    ConstraintViolation,
    DimensionMismatch,
    InfeasibleProblem,
    TimeoutBudgetExceeded,
    TooLarge,
)
from .fairness import balance, count_window, vertex_group_ratio
from .pairs import iter_pairs, n_pairs
from .spectral import SpectralEmbedding

log = logging.getLogger(__name__)

MAXIMIZE = "max"
MINIMIZE = "min"
# Pruning slack: subtrees are cut only when their bound misses the
# incumbent by more than this, which absorbs float error in the bound.
BOUND_TOL = 1e-9
ORACLE_MAX_N = 12


@dataclass(frozen=True)
class DistanceMatrix:
    d: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, dtype=float, copy=True)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise DimensionMismatch(f"distance matrix must be square, got {d.shape}")
        if not np.array_equal(d, d.T):
            raise ValueError("distance matrix must be exactly symmetric")
        if np.any(np.diag(d) != 0) or np.any(d < 0):
            raise ValueError("distances must be nonnegative with a zero diagonal")
        d.flags.writeable = False
        object.__setattr__(self, "d", d)

    @property
    def n(self):
        return self.d.shape[0]

    def condensed(self) -> np.ndarray:
        iu = np.triu_indices(self.n, k=1)
        return self.d[iu]


def distance_matrix(e: SpectralEmbedding | np.ndarray) -> DistanceMatrix:
    """Euclidean distances between spectral vectors."""
    Q = e.Q if isinstance(e, SpectralEmbedding) else np.asarray(e, dtype=float)
    n = Q.shape[0]
    d = np.zeros((n, n))
    for m in range(n):
        for k in range(m + 1, n):
            d[m, k] = d[k, m] = math.sqrt(float(np.sum((Q[m] - Q[k]) ** 2)))
    return DistanceMatrix(d)


@dataclass(frozen=True)
class BalanceConstraint:
    attribute: str
    column: tuple
    population_ratio: float
    bound: float
    windows: tuple  # windows[g] for g = 0..F_U; index 0 unused


@dataclass(frozen=True)
class PartitionProblem:
    distances: DistanceMatrix
    F_L: int
    F_U: int
    balance_bounds: Mapping[str, float] = field(default_factory=dict)
    attrs: AttributeTable | None = None
    sense: str = MAXIMIZE

    def __post_init__(self):
        n = self.distances.n
        if self.sense not in (MAXIMIZE, MINIMIZE):
            raise ValueError(f"sense must be 'max' or 'min', got {self.sense!r}")
        if not (1 <= self.F_L <= self.F_U <= n):
            raise ValueError(
                f"group size bounds must satisfy 1 <= F_L <= F_U <= n, "
                f"got F_L={self.F_L}, F_U={self.F_U}, n={n}")
        object.__setattr__(self, "balance_bounds", dict(self.balance_bounds))
        for s, b in self.balance_bounds.items():
            if not 0.0 <= b <= 1.0:
                raise ValueError(f"balance bound for {s!r} must lie in [0, 1], got {b}")
        if self.balance_bounds:
            if self.attrs is None:
                raise ValueError("balance bounds given without an attribute table")
            for s in self.balance_bounds:
                self.attrs.column(s)
        if self.attrs is not None and self.attrs.n != n:
            raise DimensionMismatch(
                f"attribute table has {self.attrs.n} rows, distance matrix has {n}")

    @property
    def n(self):
        return self.distances.n

    @property
    def maximize(self):
        return self.sense == MAXIMIZE

    def with_sense(self, sense):
        return PartitionProblem(self.distances, self.F_L, self.F_U, self.balance_bounds,
                                self.attrs, sense)

    def active_constraints(self) -> list:
        """Balance constraints that actually restrict the partition."""
        out = []
        for s, b in self.balance_bounds.items():
            col = self.attrs.column(s)
            a_s = int(col.sum()) / self.n
            if b <= 0:
                continue
            if a_s in (0.0, 1.0):
                log.warning("attribute %r has population ratio %g; its balance "
                            "constraint is trivially met and is skipped", s, a_s)
                continue
            windows = (None,) + tuple(count_window(g, a_s, b) for g in range(1, self.F_U + 1))
            out.append(BalanceConstraint(s, tuple(int(x) for x in col), a_s, b, windows))
        return out


@dataclass(frozen=True)
class PartitionSolution:
    assignment: tuple
    w: np.ndarray
    objective: float
    proven_optimal: bool
    sense: str = MAXIMIZE
    nodes: int = 0

    @property
    def groups(self) -> list:
        k = max(self.assignment) + 1 if self.assignment else 0
        out = [[] for _ in range(k)]
        for m, c in enumerate(self.assignment):
            out[c].append(m)
        return out

    @property
    def group_sizes(self) -> list:
        return [len(g) for g in self.groups]


def canonical_assignment(assignment: Sequence[int]) -> tuple:
    """Relabel groups 0, 1, ... in order of their lowest member."""
    labels = {}
    return tuple(labels.setdefault(c, len(labels)) for c in assignment)


def edge_vector(assignment: Sequence[int]) -> np.ndarray:
    a = list(assignment)
    n = len(a)
    w = np.zeros(n_pairs(n), dtype=np.uint8)
    for i, (m, k) in enumerate(iter_pairs(n)):
        if a[m] == a[k]:
            w[i] = 1
    return w


def objective_value(w, d: DistanceMatrix | np.ndarray) -> float:
    """Sum of distances over pairs with ``w = 1``.

    Uses exactly rounded summation so the value does not depend on the
    order pairs are visited in.
    """
    dm = d.d if isinstance(d, DistanceMatrix) else np.asarray(d, dtype=float)
    w = np.asarray(w)
    n = dm.shape[0]
    if w.shape != (n_pairs(n),):
        raise DimensionMismatch(f"pair vector has length {w.size}, expected {n_pairs(n)}")
    iu = np.triu_indices(n, k=1)
    return math.fsum(dm[iu][w.astype(bool)].tolist())


def _assignment_objective(assignment, d) -> float:
    groups = {}
    for m, c in enumerate(assignment):
        groups.setdefault(c, []).append(m)
    terms = []
    for members in groups.values():
        for i, m in enumerate(members):
            for k in members[i + 1:]:
                terms.append(d[m][k])
    return math.fsum(terms)


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    reason: str = ""
    group_counts: tuple = ()

    def __bool__(self):
        return self.feasible


def _composition_counts(n, F_L, F_U):
    return tuple(k for k in range(1, n + 1) if k * F_L <= n <= k * F_U)


def feasibility_check(problem: PartitionProblem) -> Feasibility:
    """Necessary conditions on sizes and balance windows, checked up front."""
    n, F_L, F_U = problem.n, problem.F_L, problem.F_U
    ks = _composition_counts(n, F_L, F_U)
    if not ks:
        if F_L == F_U:
            why = f"no composition of {n} into parts of size exactly {F_L}"
        else:
            why = f"no composition of {n} into parts with sizes in [{F_L}, {F_U}]"
        return Feasibility(False, why)
    for con in problem.active_constraints():
        pop = sum(con.column)
        reach = {(0, 0)}
        frontier = [(0, 0)]
        while frontier:
            nxt = []
            for used, hits in frontier:
                for g in range(F_L, F_U + 1):
                    win = con.windows[g]
                    if win is None or used + g > n:
                        continue
                    for c in range(win[0], win[1] + 1):
                        state = (used + g, hits + c)
                        if state[1] > pop or state[0] - state[1] > n - pop:
                            continue
                        if state not in reach:
                            reach.add(state)
                            nxt.append(state)
            frontier = nxt
        if (n, pop) not in reach:
            return Feasibility(
                False,
                f"attribute {con.attribute!r}: {pop} of {n} students carry it, and no "
                f"grouping with sizes in [{F_L}, {F_U}] gives every group a balance "
                f">= {con.bound:g} (allowed counts per size: "
                + ", ".join(f"{g}->{'none' if con.windows[g] is None else list(con.windows[g])}"
                            for g in range(F_L, F_U + 1)) + ")")
    return Feasibility(True, "", ks)


class _Timeout(Exception):
    pass


class _Incumbent:
    """Best leaf so far under (objective, then lexicographic assignment)."""

    def __init__(self, maximize):
        self.maximize = maximize
        self.value = None
        self.assignment = None
        self._lock = threading.Lock()

    def offer(self, value, assignment):
        with self._lock:
            if self.value is None:
                better = True
            elif value == self.value:
                better = assignment < self.assignment
            else:
                better = value > self.value if self.maximize else value < self.value
            if better:
                self.value = value
                self.assignment = assignment


@lru_cache(maxsize=None)
def _pair_count_range(sizes: tuple, remaining: int, F_L: int, F_U: int):
    """Min and max number of new same-group pairs when ``remaining`` students
    join groups of the given current ``sizes`` or open new groups, with every
    final group size in [F_L, F_U]. ``None`` if no completion exists.
    """
    INF = math.inf
    lo = [INF] * (remaining + 1)
    hi = [-INF] * (remaining + 1)
    lo[0] = hi[0] = 0
    for s in sizes:
        nlo = [INF] * (remaining + 1)
        nhi = [-INF] * (remaining + 1)
        first = max(0, F_L - s)
        for used in range(remaining + 1):
            if lo[used] == INF:
                continue
            for add in range(first, min(F_U - s, remaining - used) + 1):
                gain = add * s + add * (add - 1) // 2
                u = used + add
                nlo[u] = min(nlo[u], lo[used] + gain)
                nhi[u] = max(nhi[u], hi[used] + gain)
        lo, hi = nlo, nhi
    # new groups: unbounded knapsack over sizes F_L..F_U
    for used in range(remaining + 1):
        if lo[used] == INF:
            continue
        for g in range(F_L, F_U + 1):
            u = used + g
            if u > remaining:
                break
            gain = g * (g - 1) // 2
            lo[u] = min(lo[u], lo[used] + gain)
            hi[u] = max(hi[u], hi[used] + gain)
    if lo[remaining] == INF:
        return None
    return lo[remaining], hi[remaining]


class _Search:
    def __init__(self, problem: PartitionProblem, incumbent: _Incumbent, deadline):
        self.n = n = problem.n
        self.F_L, self.F_U = problem.F_L, problem.F_U
        self.maximize = problem.maximize
        self.d = problem.distances.d.tolist()
        self.cons = problem.active_constraints()
        self.incumbent = incumbent
        self.deadline = deadline
        self.nodes = 0

        # attributed students at index >= k, per constraint
        self.rem_attr = []
        for con in self.cons:
            suffix = [0] * (n + 1)
            for k in range(n - 1, -1, -1):
                suffix[k] = suffix[k + 1] + con.column[k]
            self.rem_attr.append(suffix)

        # Distances of pairs not yet decided once students < k are placed,
        # sorted best-first, as prefix sums.
        self.best_prefix = []
        for k in range(n + 1):
            ds = [self.d[i][j] for j in range(k, n) for i in range(j)]
            ds.sort(reverse=self.maximize)
            pref = [0.0]
            for x in ds:
                pref.append(pref[-1] + x)
            self.best_prefix.append(pref)

        # Each still-unplaced j has at most F_U - 1 lower-indexed group mates.
        self.mate_bound = [0.0] * (n + 1)
        if self.maximize:
            for j in range(n - 1, -1, -1):
                row = sorted((self.d[j][i] for i in range(j)), reverse=True)
                self.mate_bound[j] = self.mate_bound[j + 1] + sum(row[:self.F_U - 1])

        self.assign = []
        self.sizes = []
        self.members = []
        self.hits = [[] for _ in self.cons]

    def place(self, m, c):
        if c == len(self.sizes):
            self.sizes.append(0)
            self.members.append([])
            for h in self.hits:
                h.append(0)
        gain = 0.0
        for i in self.members[c]:
            gain += self.d[m][i]
        self.sizes[c] += 1
        self.members[c].append(m)
        for h, con in zip(self.hits, self.cons):
            h[c] += con.column[m]
        self.assign.append(c)
        return gain

    def unplace(self, m, c):
        self.assign.pop()
        self.members[c].pop()
        self.sizes[c] -= 1
        for h, con in zip(self.hits, self.cons):
            h[c] -= con.column[m]
        if self.sizes[c] == 0:
            self.sizes.pop()
            self.members.pop()
            for h in self.hits:
                h.pop()

    def _balance_ok(self, k):
        """Every partial group can still end with an admissible count."""
        left = self.n - k
        for ci, con in enumerate(self.cons):
            ra = self.rem_attr[ci][k]
            rn = left - ra
            for s, c in zip(self.sizes, self.hits[ci]):
                ok = False
                for G in range(max(s, self.F_L), min(self.F_U, s + left) + 1):
                    win = con.windows[G]
                    if win is None:
                        continue
                    x_lo = max(0, win[0] - c, G - s - rn)
                    x_hi = min(ra, win[1] - c, G - s)
                    if x_lo <= x_hi:
                        ok = True
                        break
                if not ok:
                    return False
        return True

    def _leaf_ok(self):
        for s in self.sizes:
            if not self.F_L <= s <= self.F_U:
                return False
        for ci, con in enumerate(self.cons):
            for s, c in zip(self.sizes, self.hits[ci]):
                win = con.windows[s]
                if win is None or not win[0] <= c <= win[1]:
                    return False
        return True

    def _tick(self):
        self.nodes += 1
        if self.deadline is not None and self.nodes & 255 == 1:
            if time.monotonic() > self.deadline:
                raise _Timeout

    def prunable(self, k, cur):
        rng = _pair_count_range(tuple(sorted(self.sizes)), self.n - k, self.F_L, self.F_U)
        if rng is None:
            return True
        if self.cons and not self._balance_ok(k):
            return True
        inc = self.incumbent.value
        if inc is None:
            return False
        if self.maximize:
            pref = self.best_prefix[k]
            bound = cur + min(pref[min(rng[1], len(pref) - 1)], self.mate_bound[k])
            return bound < inc - BOUND_TOL
        pref = self.best_prefix[k]
        bound = cur + pref[min(rng[0], len(pref) - 1)]
        return bound > inc + BOUND_TOL

    def dfs(self, k, cur):
        self._tick()
        if k == self.n:
            if self._leaf_ok():
                a = tuple(self.assign)
                self.incumbent.offer(_assignment_objective(a, self.d), a)
            return
        if self.prunable(k, cur):
            return
        for c in range(len(self.sizes) + 1):
            if c < len(self.sizes) and self.sizes[c] >= self.F_U:
                continue
            gain = self.place(k, c)
            self.dfs(k + 1, cur + gain)
            self.unplace(k, c)

    def replay(self, prefix):
        cur = 0.0
        for m, c in enumerate(prefix):
            cur += self.place(m, c)
        return cur


def _frontier(problem, target):
    """Breadth-first expansion of assignment prefixes, in lexicographic order."""
    level = [()]
    depth = 0
    while len(level) < target and depth < problem.n:
        nxt = []
        for p in level:
            k = max(p) + 1 if p else 0
            sizes = [0] * k
            for c in p:
                sizes[c] += 1
            for c in range(k + 1):
                if c < k and sizes[c] >= problem.F_U:
                    continue
                nxt.append(p + (c,))
        level = nxt
        depth += 1
    return level


def _solution(problem, assignment, proven, nodes):
    w = edge_vector(assignment)
    return PartitionSolution(
        assignment=tuple(assignment),
        w=w,
        objective=objective_value(w, problem.distances),
        proven_optimal=proven,
        sense=problem.sense,
        nodes=nodes,
    )


def solve_exact(problem: PartitionProblem, time_budget: float | None = 60.0,
                workers: int = 1) -> PartitionSolution:
    """Optimal partition by depth-first branch and bound.

    Among equally scored optima the lexicographically smallest canonical
    assignment is returned, whatever ``workers`` is. When the time budget
    runs out the best partition found so far is returned with
    ``proven_optimal=False``; if none was found, :class:`TimeoutBudgetExceeded`
    is raised.
    """
    feas = feasibility_check(problem)
    if not feas:
        raise InfeasibleProblem(feas.reason)
    deadline = None if time_budget is None else time.monotonic() + time_budget
    incumbent = _Incumbent(problem.maximize)
    timed_out = False
    nodes = 0

    if workers <= 1:
        search = _Search(problem, incumbent, deadline)
        try:
            search.dfs(0, 0.0)
        except _Timeout:
            timed_out = True
        nodes = search.nodes
    else:
        stop = threading.Event()
        counts = []

        def run(prefix):
            if stop.is_set():
                return
            s = _Search(problem, incumbent, deadline)
            cur = s.replay(prefix)
            try:
                s.dfs(len(prefix), cur)
            except _Timeout:
                stop.set()
            counts.append(s.nodes)

        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, _frontier(problem, 8 * workers)))
        timed_out = stop.is_set()
        nodes = sum(counts)

    if incumbent.assignment is None:
        if timed_out:
            raise TimeoutBudgetExceeded(
                f"no feasible partition found within {time_budget} s")
        raise InfeasibleProblem("no partition satisfies the size and balance constraints jointly")
    return _solution(problem, incumbent.assignment, not timed_out, nodes)


def restricted_growth_strings(n: int, max_block: int | None = None):
    """Yield every set partition of range(n) as a restricted growth string,
    in lexicographic order. Blocks larger than ``max_block`` are skipped.
    """
    if n == 0:
        yield ()
        return
    cap = n if max_block is None else max_block
    a = [0] * n
    sizes = [0] * (n + 1)

    def rec(i, k):
        if i == n:
            yield tuple(a)
            return
        for c in range(k + 1):
            if sizes[c] >= cap:
                continue
            a[i] = c
            sizes[c] += 1
            yield from rec(i + 1, max(k, c + 1))
            sizes[c] -= 1

    yield from rec(0, 0)


def brute_force_oracle(problem: PartitionProblem):
    """Optimum by exhaustive enumeration of set partitions (test oracle).

    Returns ``(solution, candidates)`` where ``candidates`` counts the
    partitions satisfying the size and balance constraints.
    """
    n = problem.n
    if n > ORACLE_MAX_N:
        raise TooLarge(f"brute force is limited to n <= {ORACLE_MAX_N}, got {n}")
    d = problem.distances.d.tolist()
    checks = []
    for s, b in problem.balance_bounds.items():
        col = [int(x) for x in problem.attrs.column(s)]
        checks.append((col, sum(col) / n, b))
    pairs = list(iter_pairs(n))
    best, best_value, candidates = None, None, 0
    for rgs in restricted_growth_strings(n, problem.F_U):
        k = max(rgs) + 1
        sizes = [0] * k
        for c in rgs:
            sizes[c] += 1
        if min(sizes) < problem.F_L:
            continue
        fair = True
        for col, a_s, b in checks:
            hits = [0] * k
            for m, c in enumerate(rgs):
                hits[c] += col[m]
            if any(balance(h / g, a_s) < b - 1e-9 for h, g in zip(hits, sizes)):
                fair = False
                break
        if not fair:
            continue
        candidates += 1
        value = math.fsum(d[m][k] for m, k in pairs if rgs[m] == rgs[k])
        if best is None or (value > best_value if problem.maximize else value < best_value):
            best, best_value = rgs, value
    if best is None:
        raise InfeasibleProblem("no partition satisfies the size and balance constraints")
    return _solution(problem, best, True, candidates), candidates


def validate_solution(problem: PartitionProblem, solution: PartitionSolution):
    """Re-check a solution against the pair-vector form of every constraint.

    Raises :class:`ConstraintViolation` listing each failed check.
    """
    n = problem.n
    w = np.asarray(solution.w)
    problems = []
    if w.shape != (n_pairs(n),):
        raise ConstraintViolation(f"pair vector has length {w.size}, expected {n_pairs(n)}")
    if not np.all((w == 0) | (w == 1)):
        problems.append("pair vector is not binary")
    dense = np.zeros((n, n), dtype=int)
    iu = np.triu_indices(n, k=1)
    dense[iu] = w
    dense = dense + dense.T
    # w_mn + w_mo - w_no <= 1 over distinct m, n, o
    tri = dense[:, :, None] + dense[:, None, :] - dense[None, :, :]
    distinct = (np.eye(n, dtype=bool)[:, :, None] | np.eye(n, dtype=bool)[:, None, :]
                | np.eye(n, dtype=bool)[None, :, :])
    if np.any(tri[~distinct] > 1):
        problems.append("triangle inequality violated")
    sizes = dense.sum(axis=1) + 1
    for m in range(n):
        if not problem.F_L <= sizes[m] <= problem.F_U:
            problems.append(f"student {m} is in a group of size {sizes[m]}, "
                            f"outside [{problem.F_L}, {problem.F_U}]")
    for s, b in problem.balance_bounds.items():
        a_s = int(problem.attrs.column(s).sum()) / n
        for m in range(n):
            a_cs = vertex_group_ratio(w, n, problem.attrs, s, m)
            if balance(a_cs, a_s) < b - 1e-9:
                problems.append(f"balance of {s!r} in the group of student {m} is "
                                f"{balance(a_cs, a_s):.6g} < {b:g}")
    a = solution.assignment
    if len(a) != n or any(int(w[i]) != int(a[m] == a[k]) for i, (m, k) in enumerate(iter_pairs(n))):
        problems.append("assignment does not match the pair vector")
    expect = objective_value(w, problem.distances)
    if abs(expect - solution.objective) > 1e-9 * max(1.0, abs(expect)):
        problems.append(f"objective {solution.objective!r} != recomputed {expect!r}")
    if problems:
        raise ConstraintViolation("; ".join(problems))
