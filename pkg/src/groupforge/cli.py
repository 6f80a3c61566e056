"""Command-line entry point: ``groupforge embed|partition|compare|synth``.

Exit codes: 0 success, 1 input or configuration error, 2 infeasible
constraints, 3 time budget exhausted (best partition found is written).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .cohort import (
    AffinitySpec,
    AttributeTable,
    format_number,
    load_attributes,
    load_marks,
    synth_cohort,
    three_affinity_specs,
    write_attributes,
    write_marks,
)
from .errors import ConfigError, GroupForgeError, InputError, MissingFile
from .fairness import balance_records
from .pipeline import (
    PipelineConfig,
    embed_marks,
    run_compare,
    run_scenario,
    select,
)
from .report import QUARTILE_METHOD, solution_json, write_json, write_report_csv

log = logging.getLogger("groupforge")

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_TIMEOUT = 0, 1, 2, 3


def _balance_arg(text):
    name, sep, value = text.partition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError(f"expected attr=B_L, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"balance bound {value!r} is not a number") from None


def _common(p, marks=True, attrs=False):
    if marks:
        p.add_argument("--marks", required=True, help="marks CSV (student_id, course columns)")
    if attrs:
        p.add_argument("--attrs", help="binary sensitive-attribute CSV")
    p.add_argument("--config", help="JSON file of pipeline settings")
    p.add_argument("--out-dir", default=".", help="directory for output files")
    p.add_argument("--seed", type=int)
    p.add_argument("--delimiter", default=",")
    p.add_argument("-v", "--verbose", action="store_true")


def _graph_flags(p):
    p.add_argument("--A", type=float, help="edge weight exponent scale (default 10)")
    p.add_argument("--B", type=float, help="correlation threshold for an edge (default 0.5)")
    p.add_argument("--M", type=int, help="embedding dimension (default 3)")
    p.add_argument("--correlation", dest="correlation_kind", choices=["pearson", "spearman"])
    p.add_argument("--dump-graph", action="store_true",
                   help="also write the similarity adjacency matrix to graph.csv")


def _partition_flags(p):
    p.add_argument("--fl", type=int, dest="F_L", help="minimum group size (default 5)")
    p.add_argument("--fu", type=int, dest="F_U", help="maximum group size (default 5)")
    p.add_argument("--balance", type=_balance_arg, action="append", default=[],
                   metavar="ATTR=B_L", help="balance lower bound for an attribute (repeatable)")
    p.add_argument("--sample", type=int, help="partition a uniform random subset of this size")
    p.add_argument("--time-budget", type=float, dest="time_budget_s")
    p.add_argument("--workers", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="groupforge", allow_abbrev=False,
                                     description="Fair, skill-diverse group formation from course marks.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", allow_abbrev=False, help="write Laplacian-eigenmap coordinates")
    _common(p)
    _graph_flags(p)

    p = sub.add_parser("partition", allow_abbrev=False, help="form groups")
    _common(p, attrs=True)
    _graph_flags(p)
    _partition_flags(p)
    p.add_argument("--sense", choices=["max", "min"])

    p = sub.add_parser("compare", allow_abbrev=False,
                       help="min-diversity vs unconstrained vs fair max-diversity")
    _common(p, attrs=True)
    _graph_flags(p)
    _partition_flags(p)

    p = sub.add_parser("synth", allow_abbrev=False, help="generate a synthetic cohort")
    _common(p, marks=False)
    p.add_argument("--spec", required=True, help="JSON description of the affinities")
    return parser


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    overrides = {k: getattr(args, k, None) for k in
                 ("A", "B", "M", "F_L", "F_U", "sense", "correlation_kind", "seed",
                  "time_budget_s", "sample", "workers")}
    if getattr(args, "balance", None):
        bounds = dict(cfg.balance_bounds)
        bounds.update(dict(args.balance))
        overrides["balance_bounds"] = bounds
    return cfg.updated(overrides).validate()


def _out(args, name):
    return os.path.join(args.out_dir, name)


def _write_embedding(emb, args):
    e = emb.embedding
    with open(_out(args, "embedding.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["student_id", *(f"q_{j + 1}" for j in range(e.M))])
        for sid, row in zip(emb.marks.student_ids, e.Q):
            w.writerow([sid, *(format_number(x) for x in row)])
    with open(_out(args, "eigenvalues.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "eigenvalue", "retained"])
        for i, lam in enumerate(e.eigenvalues):
            w.writerow([i, format_number(lam), int(1 <= i <= e.M)])
    if args.dump_graph:
        with open(_out(args, "graph.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["student_id", *emb.marks.student_ids])
            for sid, row in zip(emb.marks.student_ids, emb.graph.W):
                w.writerow([sid, *(format_number(x) for x in row)])


def _load(args, cfg):
    marks = load_marks(args.marks, args.delimiter)
    attrs = None
    if getattr(args, "attrs", None):
        attrs = load_attributes(args.attrs, args.delimiter, marks)
    emb = embed_marks(marks, cfg)
    return emb, attrs


def _report_header(cfg, cohort, emb):
    return {
        "quartile_method": QUARTILE_METHOD,
        "config": cfg.reported(),
        "n_students": cohort.marks.n,
        "n_cohort": emb.marks.n,
        "sample": None if cfg.sample is None else {
            "size": len(cohort.indices), "seed": cfg.seed,
            "student_ids": list(cohort.marks.student_ids)},
        "warnings": list(emb.embedding.warnings),
    }


def cmd_embed(args):
    cfg = _config(args)
    marks = load_marks(args.marks, args.delimiter)
    emb = embed_marks(marks, cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    _write_embedding(emb, args)
    return EXIT_OK


def _attr_names(cohort):
    return cohort.attrs.names if cohort.attrs is not None else []


def cmd_partition(args):
    cfg = _config(args)
    emb, attrs = _load(args, cfg)
    cohort = select(emb, attrs, cfg)
    res = run_scenario("partition", cohort, cfg, cfg.sense, cfg.balance_bounds)
    if res.solution is None:
        print(f"groupforge: {res.report.status}: {res.report.reason}", file=sys.stderr)
        return res.exit_code
    os.makedirs(args.out_dir, exist_ok=True)
    _write_embedding(emb, args)
    records = balance_records(res.solution.assignment, cohort.attrs) if _attr_names(cohort) else []
    write_json(solution_json(res.solution, cohort.marks, records), _out(args, "solution.json"))
    report = _report_header(cfg, cohort, emb)
    report["scenarios"] = [res.report.to_dict()]
    write_json(report, _out(args, "report.json"))
    write_report_csv([res.report], _attr_names(cohort), _out(args, "report.csv"))
    if res.exit_code == EXIT_TIMEOUT:
        print("groupforge: time budget exhausted; wrote best partition found "
              "(not proven optimal)", file=sys.stderr)
    return res.exit_code


def cmd_compare(args):
    cfg = _config(args)
    emb, attrs = _load(args, cfg)
    cohort = select(emb, attrs, cfg)
    results = run_compare(cohort, cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    _write_embedding(emb, args)
    for r in results:
        if r.solution is not None:
            records = balance_records(r.solution.assignment, cohort.attrs) if _attr_names(cohort) else []
            write_json(solution_json(r.solution, cohort.marks, records),
                       _out(args, f"solution_{r.report.name}.json"))
        else:
            print(f"groupforge: {r.report.name}: {r.report.status}: {r.report.reason}",
                  file=sys.stderr)
    report = _report_header(cfg, cohort, emb)
    report["scenarios"] = [r.report.to_dict() for r in results]
    write_json(report, _out(args, "report.json"))
    write_report_csv([r.report for r in results], _attr_names(cohort), _out(args, "report.csv"))
    codes = {r.exit_code for r in results}
    for code in (EXIT_INFEASIBLE, EXIT_TIMEOUT):
        if code in codes:
            return code
    return EXIT_OK


def _read_synth_spec(path):
    if not os.path.isfile(path):
        raise MissingFile(f"no such spec file: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(spec, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    try:
        if spec.get("preset") == "three_affinities":
            L = int(spec.get("L", 23))
            specs = three_affinity_specs(int(spec.get("count", 18)),
                                         float(spec.get("noise", 5.0)), L)
        elif "affinities" in spec:
            specs = [AffinitySpec(int(a["count"]), [float(x) for x in a["profile"]],
                                  float(a.get("noise", 0.0)), a.get("name"))
                     for a in spec["affinities"]]
            L = int(spec.get("L", len(specs[0].profile) if specs else 0))
        else:
            raise ConfigError(f"{path}: needs 'affinities' or 'preset': 'three_affinities'")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise ConfigError(f"{path}: malformed affinity spec ({exc})") from None
    return specs, L, spec.get("attributes", {}), spec.get("seed")


def cmd_synth(args):
    specs, L, attributes, spec_seed = _read_synth_spec(args.spec)
    if args.config:
        seed = PipelineConfig.from_file(args.config).seed
    else:
        seed = 0
    if spec_seed is not None:
        seed = int(spec_seed)
    if args.seed is not None:
        seed = args.seed
    marks, labels = synth_cohort(specs, L, seed)
    os.makedirs(args.out_dir, exist_ok=True)
    write_marks(marks, _out(args, "marks_synth.csv"), args.delimiter)
    names = [s.name or f"affinity_{i}" for i, s in enumerate(specs)]
    with open(_out(args, "labels.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=args.delimiter, lineterminator="\n")
        w.writerow(["student_id", "label"])
        for sid, lab in zip(marks.student_ids, labels):
            w.writerow([sid, names[lab]])
    if attributes:
        rng = np.random.default_rng([seed, 1])
        cols = {}
        for name, share in attributes.items():
            k = int(round(float(share) * marks.n))
            col = np.zeros(marks.n, dtype=np.int8)
            col[rng.choice(marks.n, size=k, replace=False)] = 1
            cols[name] = col
        write_attributes(AttributeTable(marks.student_ids, cols),
                         _out(args, "attributes_synth.csv"), args.delimiter)
    return EXIT_OK


COMMANDS = {"embed": cmd_embed, "partition": cmd_partition,
            "compare": cmd_compare, "synth": cmd_synth}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; 2 means "infeasible" here
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="groupforge: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (InputError, ValueError) as exc:
        print(f"groupforge: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except GroupForgeError as exc:
        print(f"groupforge: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
