"""Command-line interface: ``compare``, ``simulate``, ``report``, ``demo``, ``generate``.

Exit codes: 0 success, 2 usage or validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .benchmark import DgpSpec, ScenarioConfig, gen_scenario, sample_dataset
from .core import ConfigurationError, DomainError, HtePredictions, TestDataset, make_folds
from .estimators import (
    LinkFunction,
    compare_absolute,
    compare_relative,
    dina_absolute_error,
    dina_relative_error,
    eif_absolute_error,
    eif_relative_error,
)
from .harness import (
    NuisanceOption,
    StudyConfig,
    run_fig1_demo,
    run_fig2_demo,
    run_study,
)
from .learners import BOOSTING_NUISANCE, LOGISTIC, Family, LearnerSpec, cross_fit, predict_true_nuisance
from .report import FIG_METRICS, bar_chart_svg, interval_plot_svg, write_csv, write_json

SCHEMA_VERSION = "1"
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger(__name__)


class UsageError(Exception):
    """Bad input from the command line or an input file (exit code 2)."""


class CsvFormatError(UsageError):
    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.row = row
        self.column = column


# ---------------------------------------------------------------------------
# Dataset and prediction files


def _cell(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise CsvFormatError(f"non-numeric value {text!r}", row, column) from None
    if not math.isfinite(value):
        raise CsvFormatError(f"non-finite value {text!r}", row, column)
    return value


def parse_dataset_csv(path, min_rows: int = 2) -> TestDataset:
    """Read a ``x1,...,xd,w,y`` file. Data rows are numbered from 1 after the header."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvFormatError("empty file")
    header = [h.strip() for h in rows[0]]
    d = len(header) - 2
    expected = [f"x{j}" for j in range(1, d + 1)] + ["w", "y"]
    if d < 1 or header != expected:
        missing = [c for c in ("x1", "w", "y") if c not in header]
        detail = f"missing columns {missing}" if missing else f"expected header {','.join(expected)}"
        raise CsvFormatError(f"bad header {','.join(header)}: {detail}", 0)
    data = np.empty((len(rows) - 1, d + 2))
    for i, raw in enumerate(rows[1:], start=1):
        if len(raw) != d + 2:
            raise CsvFormatError(f"expected {d + 2} cells, found {len(raw)}", i)
        for j, text in enumerate(raw):
            data[i - 1, j] = _cell(text.strip(), i, header[j])
        if data[i - 1, d] not in (0.0, 1.0):
            raise CsvFormatError(f"treatment must be 0 or 1, found {raw[d].strip()!r}", i, "w")
    n = data.shape[0]
    if n < min_rows:
        raise CsvFormatError(f"need at least {min_rows} data rows, found {n}")
    try:
        ds = TestDataset(data[:, :d], data[:, d], data[:, d + 1])
    except DomainError as exc:
        raise CsvFormatError(str(exc)) from None
    log.info("read %s: %d rows, %d covariates", path, ds.n, ds.d)
    return ds


def write_dataset_csv(path, dataset: TestDataset) -> None:
    header = [f"x{j}" for j in range(1, dataset.d + 1)] + ["w", "y"]
    rows = (list(map(float, x)) + [int(w), float(y)]
            for x, w, y in zip(dataset.covariates, dataset.treatment, dataset.outcome))
    write_csv(path, header, rows)


def read_predictions(path, n: int, label: str) -> HtePredictions:
    """Single-column file, optional non-numeric header line."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows:
        try:
            float(rows[0][0])
        except ValueError:
            rows = rows[1:]
    values = []
    for i, r in enumerate(rows, start=1):
        if len(r) != 1:
            raise CsvFormatError(f"prediction file {path} must have one column", i)
        values.append(_cell(r[0].strip(), i, label))
    if len(values) != n:
        raise UsageError(f"{label}: {len(values)} predictions for {n} data rows")
    return HtePredictions(np.array(values), label)


def write_predictions(path, values, label: str = "tau_hat") -> None:
    write_csv(path, [label], ([float(v)] for v in values))


# ---------------------------------------------------------------------------
# Rendering shared by every command and by ``report``


def _est_row(name, est, truth=None):
    return (name, est["point"], est["ci_lo"], est["ci_hi"], truth)


def render(payload: dict, out_dir: Path) -> List[Path]:
    """Write CSV tables and SVG figures for a results payload; returns the files."""
    out_dir.mkdir(parents=True, exist_ok=True)
    kind = payload.get("kind")
    written = []
    if kind == "simulate":
        rows = payload["metrics"]
        header = list(rows[0].keys()) if rows else []
        write_csv(out_dir / "metrics.csv", header, ([r[h] for h in header] for r in rows))
        written.append(out_dir / "metrics.csv")
        alpha = payload["config"]["alpha"]
        for method in payload["config"]["methods"]:
            mine = [r for r in rows if r["method"] == method]
            for metric in FIG_METRICS:
                ref = 1 - alpha if metric == "coverage" else None
                svg = bar_chart_svg(f"{method}: {metric}", [(r["target"], r[metric]) for r in mine], ref)
                path = out_dir / f"{method}_{metric}.svg"
                path.write_text(svg)
                written.append(path)
    elif kind in ("compare", "demo"):
        est = payload["estimates"]
        truth = payload.get("oracle", {})
        items = [_est_row(k, v, truth.get(k)) for k, v in est.items()]
        write_csv(out_dir / "estimates.csv", ["name", "point", "ci_lo", "ci_hi", "truth"], items)
        svg = interval_plot_svg(payload.get("title", kind), items)
        (out_dir / "estimates.svg").write_text(svg)
        written += [out_dir / "estimates.csv", out_dir / "estimates.svg"]
    else:
        raise UsageError(f"unknown results kind {kind!r}")
    return written


def _emit(payload: dict, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    write_json(out_dir / "results.json", payload)
    # render from the serialized form so ``report`` reproduces the same files
    render(json.loads((out_dir / "results.json").read_text()), out_dir)


# ---------------------------------------------------------------------------
# Commands


def _nuisance(spec: str, data: TestDataset, folds: int, seed: int):
    if spec.startswith("true:"):
        path = spec[len("true:"):]
        try:
            dgp = DgpSpec.from_dict(json.loads(Path(path).read_text()))
        except (OSError, KeyError, ValueError) as exc:
            raise UsageError(f"--nuisance: cannot read DGP file {path}: {exc}") from None
        if dgp.d != data.d:
            raise UsageError(f"--nuisance: DGP has {dgp.d} covariates, data has {data.d}")
        return predict_true_nuisance(dgp, data)
    outcome = {
        "lasso": LearnerSpec(Family.LASSO),
        "boosting": BOOSTING_NUISANCE,
        "logistic-ols": LearnerSpec(Family.OLS),
    }.get(spec)
    if outcome is None:
        raise UsageError(f"--nuisance: unknown option {spec!r}")
    return cross_fit(data, make_folds(data.n, folds, seed), outcome, LOGISTIC, seed=seed)


def cmd_compare(args) -> int:
    data = parse_dataset_csv(args.data, min_rows=2 * args.folds)
    pa = read_predictions(args.pred_a, data.n, "pred_a")
    pb = read_predictions(args.pred_b, data.n, "pred_b")
    warnings = []
    if np.array_equal(pa.values, pb.values):
        msg = "the two prediction files are identical; the relative error is degenerate"
        print(f"warning: {msg}", file=sys.stderr)
        warnings.append(msg)
    nf = _nuisance(args.nuisance, data, args.folds, args.seed)
    link = LinkFunction(args.link)
    if args.link == "identity":
        rel, psi = eif_relative_error(pa, pb, data, nf, args.alpha)
        abs_a = eif_absolute_error(pa, data, nf, args.alpha)[0]
        abs_b = eif_absolute_error(pb, data, nf, args.alpha)[0]
    else:
        rel, psi = dina_relative_error(pa, pb, data, nf, link, args.alpha)
        abs_a = dina_absolute_error(pa, data, nf, link, args.alpha)[0]
        abs_b = dina_absolute_error(pb, data, nf, link, args.alpha)[0]
    verdict = compare_relative(rel)
    payload = {
        "kind": "compare",
        "title": "relative error of pred_a versus pred_b",
        "inputs": {"n": data.n, "d": data.d, "nuisance": args.nuisance, "folds": args.folds,
                   "alpha": args.alpha, "seed": args.seed, "link": args.link},
        "estimates": {"relative": rel.to_dict(), "absolute_a": abs_a.to_dict(),
                      "absolute_b": abs_b.to_dict()},
        "verdict": verdict.to_dict(),
        "absolute_verdict": compare_absolute(abs_a, abs_b).to_dict(),
        "n_clamped": psi.n_clamped,
        "warnings": warnings,
    }
    _emit(payload, Path(args.out))
    print(f"{verdict.decision.value} (relative error {rel.point!r}, "
          f"CI [{rel.ci_lo!r}, {rel.ci_hi!r}])")
    return EXIT_OK


SIMULATE_FLAGS = {
    "scenario": "scenario", "n_train": "n_train", "n_test": "n_test", "dgp_draws": "n_dgp_draws",
    "reps": "n_reps", "nuisance_option": "nuisance_option", "alpha": "alpha", "seed": "base_seed",
    "n_oracle": "n_oracle", "methods": "methods",
}
RUN_FILE_FIELDS = {"schema_version", "study", "out_dir"}


def _load_run_file(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"--config: cannot read {path}: {exc}") from None
    unknown = set(doc) - RUN_FILE_FIELDS
    if unknown:
        raise UsageError(f"--config: unknown fields {sorted(unknown)}")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise UsageError(f"--config: schema_version {doc.get('schema_version')!r} is not {SCHEMA_VERSION!r}")
    return doc


def cmd_simulate(args) -> int:
    study, out_dir = {}, args.out_dir
    if args.config:
        doc = _load_run_file(args.config)
        study = dict(doc.get("study", {}))
        out_dir = out_dir or doc.get("out_dir")
    if not out_dir:
        raise UsageError("--out-dir is required (or out_dir in --config)")
    for flag, name in SIMULATE_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            study[name] = value
    if "scenario" in study:
        study["scenario"] = str(study["scenario"]).upper()
    try:
        config = StudyConfig.from_dict(study)
    except (ConfigurationError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid study configuration: {exc}") from None
    table = run_study(config, workers=args.workers)
    payload = {"kind": "simulate", "config": config.to_dict(),
               "metrics": [r.to_dict() for r in table.rows]}
    _emit(payload, Path(out_dir))
    for r in table.rows:
        print(f"{r.method:10s} {r.target:9s} coverage={r.coverage:.3f} "
              f"width={r.mean_width:.3f} selection={r.selection_accuracy:.3f}")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        payload = json.loads(Path(args.input).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"--in: cannot read {args.input}: {exc}") from None
    if not isinstance(payload, dict) or payload.get("schema_version") != SCHEMA_VERSION:
        found = payload.get("schema_version") if isinstance(payload, dict) else None
        raise UsageError(f"--in: schema_version {found!r} is not {SCHEMA_VERSION!r}")
    files = render(payload, Path(args.out_dir))
    print(f"wrote {len(files)} files to {args.out_dir}")
    return EXIT_OK


def cmd_demo(args) -> int:
    fn = run_fig1_demo if args.which == "fig1" else run_fig2_demo
    result = fn(args.seed, scenario=args.scenario.upper(), n_train=args.n_train,
                n_test=args.n_test, alpha=args.alpha)
    title = ("underfit nuisances: absolute versus relative error" if args.which == "fig1"
             else "similar lasso pair: absolute versus relative error")
    payload = {"kind": "demo", "demo": args.which, "seed": args.seed, "title": title,
               **result.to_dict()}
    _emit(payload, Path(args.out_dir))
    for k, v in result.verdicts.items():
        print(f"{k}: {v}")
    return EXIT_OK


def cmd_generate(args) -> int:
    """Write a synthetic dataset, its DGP and the oracle effect (fixtures for ``compare``)."""
    dgp = gen_scenario(ScenarioConfig(args.scenario.upper(), d=args.d, seed=args.seed))
    data, tau = sample_dataset(dgp, args.n, args.noise_sd, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(out / "data.csv", data)
    write_json(out / "dgp.json", dgp.to_dict())
    write_predictions(out / "tau.csv", tau, "tau")
    print(f"wrote data.csv, dgp.json, tau.csv to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing


def _alpha(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cate-judge", description="Judge and compare HTE estimators.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compare", help="relative error of two prediction files")
    c.add_argument("--data", required=True)
    c.add_argument("--pred-a", required=True)
    c.add_argument("--pred-b", required=True)
    c.add_argument("--nuisance", default="lasso",
                   help="lasso | boosting | logistic-ols | true:<dgp.json>")
    c.add_argument("--folds", type=_positive, default=2)
    c.add_argument("--alpha", type=_alpha, default=0.10)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--link", choices=("identity", "log", "logit"), default="identity")
    c.add_argument("--out", required=True, help="output directory")
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("simulate", help="Monte Carlo coverage and selection study")
    s.add_argument("--scenario", choices=("a", "b", "c", "d", "A", "B", "C", "D"))
    s.add_argument("--n-train", type=_positive)
    s.add_argument("--n-test", type=_positive)
    s.add_argument("--dgp-draws", type=_positive)
    s.add_argument("--reps", type=_positive)
    s.add_argument("--nuisance-option", choices=[o.value for o in NuisanceOption])
    s.add_argument("--methods", nargs="+")
    s.add_argument("--alpha", type=_alpha)
    s.add_argument("--seed", type=int)
    s.add_argument("--n-oracle", type=_positive)
    s.add_argument("--workers", type=_positive)
    s.add_argument("--config", help="JSON run file with schema_version, study, out_dir")
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("report", help="re-render figures and tables from results.json")
    r.add_argument("--in", dest="input", required=True)
    r.add_argument("--out-dir", required=True)
    r.set_defaults(func=cmd_report)

    d = sub.add_parser("demo", help="single-dataset demonstrations")
    d.add_argument("which", choices=("fig1", "fig2"))
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--scenario", choices=("a", "b", "c", "d", "A", "B", "C", "D"), default="A")
    d.add_argument("--n-train", type=_positive, default=700)
    d.add_argument("--n-test", type=_positive, default=500)
    d.add_argument("--alpha", type=_alpha, default=0.10)
    d.add_argument("--out-dir", required=True)
    d.set_defaults(func=cmd_demo)

    g = sub.add_parser("generate", help="write a synthetic dataset with its DGP")
    g.add_argument("--scenario", choices=("a", "b", "c", "d", "A", "B", "C", "D"), default="A")
    g.add_argument("--n", type=_positive, default=500)
    g.add_argument("--d", type=_positive, default=20)
    g.add_argument("--noise-sd", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-dir", required=True)
    g.set_defaults(func=cmd_generate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
