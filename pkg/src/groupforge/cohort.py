"""Cohort inputs: course-mark matrices and sensitive-attribute tables."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DuplicateId,
    EmptySpec,
    IdMismatch,
    MalformedRow,
    MarkOutOfRange,
    MissingFile,
    NonBinaryValue,
    ProfileLengthMismatch,
    UnknownAttribute,
)

ID_HEADER = "student_id"


def _frozen(a, dtype):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


def _check_unique(ids):
    seen = set()
    for i in ids:
        if i in seen:
            raise DuplicateId(i)
        seen.add(i)


@dataclass(frozen=True)
class MarkMatrix:
    """N students by L courses of percentage marks.

    ``marks[m, k]`` is the mark of student ``m`` in course ``k``.
    """

    student_ids: tuple
    course_ids: tuple
    marks: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "student_ids", tuple(str(s) for s in self.student_ids))
        object.__setattr__(self, "course_ids", tuple(str(c) for c in self.course_ids))
        object.__setattr__(self, "marks", _frozen(self.marks, float))
        n, L = len(self.student_ids), len(self.course_ids)
        if self.marks.shape != (n, L):
            raise ValueError(f"marks shape {self.marks.shape} != ({n}, {L})")
        if n < 2 or L < 2:
            raise ValueError(f"need at least 2 students and 2 courses, got N={n}, L={L}")
        _check_unique(self.student_ids)
        _check_unique(self.course_ids)
        bad = np.argwhere(~((self.marks >= 0) & (self.marks <= 100)))
        if len(bad):
            m, k = bad[0]
            raise MarkOutOfRange(self.student_ids[m], self.course_ids[k], float(self.marks[m, k]))

    @property
    def n(self):
        return len(self.student_ids)

    @property
    def L(self):
        return len(self.course_ids)

    def subset(self, rows: Sequence[int]) -> "MarkMatrix":
        rows = list(rows)
        return MarkMatrix([self.student_ids[r] for r in rows], self.course_ids,
                          self.marks[rows])


@dataclass(frozen=True)
class AttributeTable:
    """Binary sensitive-attribute columns aligned with a mark matrix."""

    student_ids: tuple
    columns: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        ids = tuple(str(s) for s in self.student_ids)
        object.__setattr__(self, "student_ids", ids)
        _check_unique(ids)
        cols = {}
        for name, values in self.columns.items():
            v = np.asarray(values)
            if v.shape != (len(ids),):
                raise ValueError(f"attribute {name!r} has length {v.size}, expected {len(ids)}")
            for row, x in enumerate(v.tolist()):
                if x not in (0, 1):
                    raise NonBinaryValue(row, name, x)
            cols[str(name)] = _frozen(v, np.int8)
        object.__setattr__(self, "columns", cols)

    @property
    def n(self):
        return len(self.student_ids)

    @property
    def names(self):
        return list(self.columns)

    def column(self, s: str) -> np.ndarray:
        try:
            return self.columns[s]
        except KeyError:
            raise UnknownAttribute(s) from None

    def check_matches(self, marks: MarkMatrix):
        if len(self.student_ids) != len(marks.student_ids):
            raise IdMismatch(len(self.student_ids),
                             "attribute table row count differs from marks file")
        for a, b in zip(self.student_ids, marks.student_ids):
            if a != b:
                raise IdMismatch(a)

    def subset(self, rows: Sequence[int]) -> "AttributeTable":
        rows = list(rows)
        return AttributeTable([self.student_ids[r] for r in rows],
                              {k: v[rows] for k, v in self.columns.items()})


def _read_rows(path, delimiter):
    if not os.path.isfile(path):
        raise MissingFile(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter)]
    # trailing blank lines are not rows
    while rows and not any(c.strip() for c in rows[-1]):
        rows.pop()
    if not rows:
        raise MalformedRow(1, "file is empty")
    return rows


def _parse_mark(text, row, student, course):
    t = text.strip()
    if not t:
        raise MalformedRow(row, f"blank mark for student {student!r}, course {course!r}")
    try:
        v = float(t)
    except ValueError:
        raise MalformedRow(row, f"non-numeric mark {text!r} for course {course!r}") from None
    if not math.isfinite(v) or not 0 <= v <= 100:
        raise MarkOutOfRange(student, course, v)
    return v


def load_marks(path, delimiter=","):
    """Read a marks CSV: header of course ids, first column student ids.

    Row numbers in errors are 1-based file lines (the header is row 1).
    """
    rows = _read_rows(path, delimiter)
    header = [h.strip() for h in rows[0]]
    if len(header) < 3:
        raise MalformedRow(1, "header needs an id column and at least 2 courses")
    courses = header[1:]
    _check_unique(courses)
    ids, data = [], []
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise MalformedRow(i, f"expected {len(header)} cells, found {len(r)}")
        sid = r[0].strip()
        if not sid:
            raise MalformedRow(i, "empty student id")
        ids.append(sid)
        data.append([_parse_mark(c, i, sid, courses[k]) for k, c in enumerate(r[1:])])
    _check_unique(ids)
    if len(ids) < 2:
        raise MalformedRow(len(rows), "need at least 2 students")
    return MarkMatrix(ids, courses, np.array(data, dtype=float))


def format_number(x) -> str:
    """Shortest round-trip text for a float; integral values drop the '.0'."""
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def write_marks(mm: MarkMatrix, path, delimiter=","):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow([ID_HEADER, *mm.course_ids])
        for sid, row in zip(mm.student_ids, mm.marks):
            w.writerow([sid, *(format_number(v) for v in row)])


def load_attributes(path, delimiter=",", marks: MarkMatrix | None = None):
    """Read a binary attributes CSV, optionally checking ids against ``marks``."""
    rows = _read_rows(path, delimiter)
    header = [h.strip() for h in rows[0]]
    if len(header) < 1:
        raise MalformedRow(1, "missing header")
    names = header[1:]
    _check_unique(names)
    ids, cols = [], {n: [] for n in names}
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise MalformedRow(i, f"expected {len(header)} cells, found {len(r)}")
        sid = r[0].strip()
        ids.append(sid)
        for name, cell in zip(names, r[1:]):
            t = cell.strip()
            if t not in ("0", "1"):
                raise NonBinaryValue(i, name, t)
            cols[name].append(int(t))
    table = AttributeTable(ids, {n: np.array(v, dtype=np.int8) for n, v in cols.items()})
    if marks is not None:
        table.check_matches(marks)
    return table


def write_attributes(table: AttributeTable, path, delimiter=","):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow([ID_HEADER, *table.names])
        for i, sid in enumerate(table.student_ids):
            w.writerow([sid, *(int(table.columns[n][i]) for n in table.names)])


def population_ratio(table: AttributeTable, s: str) -> float:
    col = table.column(s)
    return int(col.sum()) / table.n


@dataclass(frozen=True)
class AffinitySpec:
    count: int
    profile: Sequence[float]
    noise: float = 0.0
    name: str | None = None


def synth_cohort(affinity_specs: Sequence, L: int, seed: int, id_prefix="s"):
    """Draw a synthetic cohort with planted affinities.

    Each spec contributes ``count`` students whose marks are the profile plus
    i.i.d. Gaussian noise, clamped to [0, 100]. Specs may be
    :class:`AffinitySpec` or ``(count, profile, noise)`` tuples.

    Returns ``(MarkMatrix, labels)`` where ``labels[m]`` is the index of the
    affinity student ``m`` was drawn from.
    """
    specs = [s if isinstance(s, AffinitySpec) else AffinitySpec(*s) for s in affinity_specs]
    if not specs:
        raise EmptySpec("at least one affinity is required")
    for i, s in enumerate(specs):
        if s.count < 1:
            raise EmptySpec(f"affinity {i} has count {s.count}")
        if len(s.profile) != L:
            raise ProfileLengthMismatch(
                f"affinity {i} profile has length {len(s.profile)}, expected L={L}")
        if s.noise < 0:
            raise ValueError(f"affinity {i} has negative noise std {s.noise}")
    rng = np.random.default_rng(seed)
    blocks, labels = [], []
    for i, s in enumerate(specs):
        profile = np.asarray(s.profile, dtype=float)
        noise = rng.standard_normal((s.count, L)) * s.noise
        blocks.append(np.clip(profile + noise, 0.0, 100.0))
        labels.extend([i] * s.count)
    marks = np.vstack(blocks)
    n = marks.shape[0]
    width = max(3, len(str(n)))
    ids = [f"{id_prefix}{m + 1:0{width}d}" for m in range(n)]
    courses = [f"c{k + 1:02d}" for k in range(L)]
    return MarkMatrix(ids, courses, marks), np.array(labels)


MATH_COURSES = (0, 1, 11, 12)
LAB_COURSES = (3, 4, 5, 14, 15, 16)


def three_affinity_specs(count=18, noise=5.0, L=23):
    """Profiles for a cohort that is weak at maths, strong at maths, or
    uniformly high achieving.

    All three share a course-difficulty pattern, so their mark vectors are
    positively correlated apart from the maths deviation.
    """
    if L < 17:
        raise ProfileLengthMismatch(f"the three-affinity preset needs L >= 17, got {L}")
    difficulty = 10.0 * np.sin(np.arange(L) * 1.3)
    weak = 62.0 + difficulty
    weak[list(MATH_COURSES)] -= 22.0
    strong = 62.0 + difficulty
    strong[list(MATH_COURSES)] += 22.0
    high = 80.0 + difficulty
    high[list(LAB_COURSES)] += 10.0
    return [
        AffinitySpec(count, weak.tolist(), noise, "maths_weak"),
        AffinitySpec(count, strong.tolist(), noise, "maths_strong"),
        AffinitySpec(count, high.tolist(), noise, "high_achiever"),
    ]
