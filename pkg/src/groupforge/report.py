"""Group reports: member lists, within-group correlation summaries, balance."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .cohort import AttributeTable, MarkMatrix, format_number
from .fairness import BalanceRecord, balance_records
from .partition import PartitionSolution

QUARTILE_METHOD = "linear interpolation between order statistics (type 7)"


def five_number_summary(values):
    """(min, Q1, median, Q3, max) with type-7 quartiles, or None if empty."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return None
    q = np.percentile(v, [0, 25, 50, 75, 100], method="linear")
    return {k: float(x) for k, x in zip(("min", "q1", "median", "q3", "max"), q)}


def within_group_correlations(members, corr: np.ndarray) -> list:
    return [float(corr[m, k]) for i, m in enumerate(members) for k in members[i + 1:]]


@dataclass
class GroupReport:
    name: str
    sense: str
    status: str
    balance_bounds: dict = field(default_factory=dict)
    reason: str = ""
    objective: float | None = None
    proven_optimal: bool = False
    groups: list = field(default_factory=list)
    balance: list = field(default_factory=list)
    median_correlation: float | None = None

    def to_dict(self):
        return {
            "name": self.name,
            "sense": self.sense,
            "status": self.status,
            "reason": self.reason,
            "balance_bounds": dict(self.balance_bounds),
            "objective": self.objective,
            "proven_optimal": self.proven_optimal,
            "median_within_group_correlation": self.median_correlation,
            "groups": self.groups,
            "balance": [b.to_dict() for b in self.balance],
        }


def build_group_report(name, solution: PartitionSolution, marks: MarkMatrix,
                       corr: np.ndarray, attrs: AttributeTable | None,
                       balance_bounds: dict) -> GroupReport:
    groups = []
    pooled = []
    for c, members in enumerate(solution.groups):
        cs = within_group_correlations(members, corr)
        pooled.extend(cs)
        summary = five_number_summary(cs)
        groups.append({
            "group_id": c,
            "size": len(members),
            "members": [marks.student_ids[m] for m in members],
            "correlation_pairs": len(cs),
            "correlation": summary,
        })
    records = balance_records(solution.assignment, attrs) if attrs is not None and attrs.names else []
    return GroupReport(
        name=name,
        sense=solution.sense,
        status="optimal" if solution.proven_optimal else "timeout",
        balance_bounds=dict(balance_bounds),
        objective=solution.objective,
        proven_optimal=solution.proven_optimal,
        groups=groups,
        balance=records,
        median_correlation=float(np.median(pooled)) if pooled else None,
    )


def failed_report(name, sense, status, reason, balance_bounds) -> GroupReport:
    return GroupReport(name=name, sense=sense, status=status, reason=reason,
                       balance_bounds=dict(balance_bounds))


def solution_json(solution: PartitionSolution, marks: MarkMatrix,
                  records: list) -> dict:
    return {
        "groups": [[marks.student_ids[m] for m in g] for g in solution.groups],
        "objective": solution.objective,
        "sense": solution.sense,
        "proven_optimal": solution.proven_optimal,
        "balance": [r.to_dict() for r in records],
        "group_sizes": solution.group_sizes,
    }


def write_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, allow_nan=False)
        fh.write("\n")


def _fmt(x):
    return "" if x is None else format_number(x)


def write_report_csv(reports, attribute_names, path):
    """One row per (scenario, group); correlation summary and balance columns."""
    header = ["scenario", "sense", "status", "objective", "group_id", "size", "members",
              "correlation_pairs", "corr_min", "corr_q1", "corr_median", "corr_q3", "corr_max"]
    for s in attribute_names:
        header += [f"{s}_ratio", f"{s}_population_ratio", f"{s}_balance"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for rep in reports:
            if not rep.groups:
                w.writerow([rep.name, rep.sense, rep.status, "", "", "", "", "", "", "", "", "", ""]
                           + [""] * (3 * len(attribute_names)))
                continue
            by_group = {}
            for b in rep.balance:
                by_group.setdefault(b.group_id, {})[b.attribute] = b
            for g in rep.groups:
                summ = g["correlation"] or {}
                row = [rep.name, rep.sense, rep.status, _fmt(rep.objective), g["group_id"],
                       g["size"], ";".join(g["members"]), g["correlation_pairs"],
                       *(_fmt(summ.get(k)) for k in ("min", "q1", "median", "q3", "max"))]
                for s in attribute_names:
                    b: BalanceRecord | None = by_group.get(g["group_id"], {}).get(s)
                    row += ([_fmt(b.group_ratio), _fmt(b.population_ratio), _fmt(b.balance)]
                            if b else ["", "", ""])
                w.writerow(row)
