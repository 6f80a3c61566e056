"""End-to-end pipeline: marks -> similarity graph -> eigenmap -> groups."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .cohort import AttributeTable, MarkMatrix
from .errors import ConfigError, InfeasibleProblem, MissingFile, TimeoutBudgetExceeded
from .graph import CORRELATIONS, GraphParams, WeightedGraph, build_similarity_graph, correlation_matrix
from .partition import (
    MAXIMIZE,
    MINIMIZE,
    PartitionProblem,
    PartitionSolution,
    distance_matrix,
    feasibility_check,
    solve_exact,
    validate_solution,
)
from .report import GroupReport, build_group_report, failed_report
from .spectral import SpectralEmbedding, embed

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    A: float = 10.0
    B: float = 0.5
    M: int = 3
    F_L: int = 5
    F_U: int = 5
    balance_bounds: dict = field(default_factory=dict)
    sense: str = MAXIMIZE
    correlation_kind: str = "pearson"
    seed: int = 0
    time_budget_s: float = 60.0
    sample: int | None = None
    workers: int = 1

    def validate(self):
        try:
            GraphParams(self.A, self.B)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if int(self.M) != self.M or self.M < 1:
            raise ConfigError(f"M must be a positive integer, got {self.M}")
        for k in ("F_L", "F_U"):
            v = getattr(self, k)
            if int(v) != v or v < 1:
                raise ConfigError(f"{k} must be a positive integer, got {v}")
        if self.F_L > self.F_U:
            raise ConfigError(f"invalid group size bounds: F_L={self.F_L} > F_U={self.F_U}")
        for s, b in self.balance_bounds.items():
            if not 0.0 <= float(b) <= 1.0:
                raise ConfigError(f"balance bound for {s!r} must lie in [0, 1], got {b}")
        if self.sense not in (MAXIMIZE, MINIMIZE):
            raise ConfigError(f"sense must be 'max' or 'min', got {self.sense!r}")
        if self.correlation_kind not in CORRELATIONS:
            raise ConfigError(f"correlation_kind must be one of {sorted(CORRELATIONS)}")
        if not self.time_budget_s > 0:
            raise ConfigError(f"time_budget_s must be positive, got {self.time_budget_s}")
        if self.sample is not None and self.sample < 2:
            raise ConfigError(f"sample size must be at least 2, got {self.sample}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        return self

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        if not os.path.isfile(path):
            raise MissingFile(f"no such config file: {path}")
        with open(path, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: expected a JSON object of settings")
        return cls().updated(raw)

    def updated(self, values: dict) -> "PipelineConfig":
        known = {f.name for f in fields(self)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        data = asdict(self)
        data.update({k: v for k, v in values.items() if v is not None})
        data["balance_bounds"] = {str(k): float(v) for k, v in data["balance_bounds"].items()}
        return PipelineConfig(**data)

    def reported(self) -> dict:
        """Settings that affect results (worker count does not)."""
        d = asdict(self)
        d.pop("workers")
        return d


@dataclass
class Embedded:
    marks: MarkMatrix
    graph: WeightedGraph
    embedding: SpectralEmbedding
    corr: np.ndarray


def embed_marks(marks: MarkMatrix, config: PipelineConfig) -> Embedded:
    corr = correlation_matrix(marks, config.correlation_kind)
    graph = build_similarity_graph(marks, GraphParams(config.A, config.B), config.correlation_kind)
    e = embed(graph, config.M)
    for w in e.warnings:
        log.warning(w)
    return Embedded(marks, graph, e, corr)


def sample_indices(n: int, size: int | None, seed: int) -> list:
    """Uniform draw without replacement, returned in ascending order."""
    if size is None or size >= n:
        return list(range(n))
    rng = np.random.default_rng(seed)
    return sorted(int(i) for i in rng.choice(n, size=size, replace=False))


@dataclass
class Cohort:
    """The (possibly subsampled) students the solver partitions."""

    marks: MarkMatrix
    attrs: AttributeTable | None
    embedding: SpectralEmbedding
    corr: np.ndarray
    indices: list


def select(emb: Embedded, attrs: AttributeTable | None, config: PipelineConfig) -> Cohort:
    idx = sample_indices(emb.marks.n, config.sample, config.seed)
    return Cohort(
        marks=emb.marks.subset(idx),
        attrs=attrs.subset(idx) if attrs is not None else None,
        embedding=emb.embedding.subset(idx),
        corr=emb.corr[np.ix_(idx, idx)],
        indices=idx,
    )


def make_problem(cohort: Cohort, config: PipelineConfig, sense: str,
                 balance_bounds: dict) -> PartitionProblem:
    n = cohort.marks.n
    if config.F_U > n:
        raise ConfigError(f"F_U={config.F_U} exceeds the number of students n={n}")
    if balance_bounds and cohort.attrs is None:
        raise ConfigError("balance bounds need an attributes file (--attrs)")
    try:
        return PartitionProblem(distance_matrix(cohort.embedding), config.F_L, config.F_U,
                                balance_bounds, cohort.attrs, sense)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


@dataclass
class ScenarioResult:
    report: GroupReport
    solution: PartitionSolution | None
    exit_code: int


def run_scenario(name: str, cohort: Cohort, config: PipelineConfig, sense: str,
                 balance_bounds: dict) -> ScenarioResult:
    problem = make_problem(cohort, config, sense, balance_bounds)
    feas = feasibility_check(problem)
    if not feas:
        return ScenarioResult(failed_report(name, sense, "infeasible", feas.reason, balance_bounds),
                              None, 2)
    try:
        sol = solve_exact(problem, config.time_budget_s, config.workers)
    except InfeasibleProblem as exc:
        return ScenarioResult(failed_report(name, sense, "infeasible", exc.reason, balance_bounds),
                              None, 2)
    except TimeoutBudgetExceeded as exc:
        return ScenarioResult(failed_report(name, sense, "timeout", str(exc), balance_bounds),
                              None, 3)
    validate_solution(problem, sol)
    log.debug("%s: %d search nodes", name, sol.nodes)
    rep = build_group_report(name, sol, cohort.marks, cohort.corr, cohort.attrs, balance_bounds)
    return ScenarioResult(rep, sol, 0 if sol.proven_optimal else 3)


COMPARE_SCENARIOS = (
    ("min_diversity", MINIMIZE, False),
    ("max_diversity_unconstrained", MAXIMIZE, False),
    ("max_diversity_fair", MAXIMIZE, True),
)


def run_compare(cohort: Cohort, config: PipelineConfig) -> list:
    return [run_scenario(name, cohort, config, sense,
                         config.balance_bounds if fair else {})
            for name, sense, fair in COMPARE_SCENARIOS]
