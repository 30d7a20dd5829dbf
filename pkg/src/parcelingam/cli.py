"""Command-line interface: ``discover``, ``simulate``, ``export-spec`` and
``benchmark``.

Exit codes: 0 success, 2 input or validation error, 3 resource budget
exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .core_stats import DataMatrix, center
from .discovery import algorithm3, direct_lingam
from .evaluation import (
    hsic_gamma_vs_permutation,
    hsic_null_rate,
    lemma_rates,
    max_recall,
    mean_report,
    score_result,
)
from .exceptions import InvalidSpec, SubsetBudgetExceeded, UnknownNetwork
from .independence import HsicTester
from .simgen import BUILTIN_NETWORKS, SemSpec, builtin_network, data_to_csv, generate

logger = logging.getLogger("parcelingam")

SCHEMA = 1
EXIT_OK, EXIT_INPUT, EXIT_BUDGET = 0, 2, 3
THREADS_ENV = "PARCELINGAM_THREADS"
FLOAT_DIGITS = 12

DESK_NETWORKS = {5: "fig2_5var", 10: "fig3_10var", 15: "fig4_15var"}


class InputError(Exception):
    """Bad user input; reported with exit code 2."""


@dataclass
class RunConfig:
    alpha: float = 0.05
    seed: int = 0
    subset_cap: int = 15
    hsic_sample_cap: int | None = None
    threads: int = 1
    output_format: str = "json"
    exclude_path_free: bool = False

    def validate(self):
        if not 0.0 < self.alpha < 1.0:
            raise InputError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.subset_cap < 2:
            raise InputError("subset cap must be at least 2")
        if self.hsic_sample_cap is not None and self.hsic_sample_cap < 10:
            raise InputError("HSIC sample cap must be at least 10")
        if self.threads < 1:
            raise InputError("threads must be at least 1")
        if self.output_format not in ("json", "csv"):
            raise InputError(f"unknown output format {self.output_format!r}")


def resolve_threads(arg: str | None) -> int:
    """Thread count from ``PARCELINGAM_THREADS`` (wins) or ``--threads``."""
    value = os.environ.get(THREADS_ENV) or arg or "1"
    if value == "auto":
        return os.cpu_count() or 1
    try:
        return int(value)
    except ValueError:
        raise InputError(f"threads must be an integer or 'auto', got {value!r}") from None


def rounded(obj):
    """Copy of ``obj`` with floats rounded to 12 decimals (stable output)."""
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return None
        v = round(v, FLOAT_DIGITS)
        return 0.0 if v == 0 else v
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v) for v in obj]
    return obj


def dump_json(obj) -> str:
    return json.dumps(rounded(obj), indent=2) + "\n"


def read_data_csv(path: str, transpose: bool = False) -> tuple[list[str], np.ndarray]:
    """Parse a numeric CSV into ``(names, d x n values)``.

    Default layout: header row of variable names, one sample per row. With
    ``transpose``: one variable per row, name in the first cell.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except UnicodeDecodeError:
        raise InputError(f"{path}: not UTF-8 text") from None
    numbered = [(k + 1, r) for k, r in enumerate(rows) if any(c.strip() for c in r)]
    if not numbered:
        raise InputError(f"{path}: no data rows")

    def number(cell, line, col):
        try:
            v = float(cell)
        except ValueError:
            raise InputError(f"{path}: line {line}, column {col}: non-numeric cell {cell!r}") from None
        if not math.isfinite(v):
            raise InputError(f"{path}: line {line}, column {col}: non-finite value {cell!r}")
        return v

    if transpose:
        names = [r[0].strip() for _, r in numbered]
        width = len(numbered[0][1])
        values = []
        for line, r in numbered:
            if len(r) != width:
                raise InputError(f"{path}: line {line}: expected {width} cells, found {len(r)}")
            values.append([number(c, line, col) for col, c in enumerate(r[1:], start=2)])
        values = np.array(values).reshape(len(names), width - 1)
    else:
        (_, header), body = numbered[0], numbered[1:]
        names = [c.strip() for c in header]
        if not body:
            raise InputError(f"{path}: no data rows")
        values = []
        for line, r in body:
            if len(r) != len(names):
                raise InputError(
                    f"{path}: line {line}: expected {len(names)} cells, found {len(r)}"
                )
            values.append([number(c, line, col) for col, c in enumerate(r, start=1)])
        values = np.array(values).T
    if len(set(names)) != len(names):
        raise InputError(f"{path}: duplicate variable names")
    if values.shape[0] < 2:
        raise InputError(f"{path}: need at least 2 variables, found {values.shape[0]}")
    if values.shape[1] < 3:
        raise InputError(f"{path}: need at least 3 samples, found {values.shape[1]}")
    return names, values


def _ordering_csv(names, entries) -> str:
    lines = ["variable," + ",".join(names)]
    for name, row in zip(names, entries):
        lines.append(name + "," + ",".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


def _write(text: str, out: str | None):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def cmd_discover(args) -> int:
    config = RunConfig(
        alpha=args.alpha,
        seed=args.seed,
        subset_cap=args.subset_cap,
        hsic_sample_cap=args.hsic_cap,
        threads=resolve_threads(args.threads),
        output_format=args.format,
    )
    config.validate()
    names, values = read_data_csv(args.input, args.transpose)
    X = center(DataMatrix.from_array(values))
    try:
        result = algorithm3(
            X,
            config.alpha,
            HsicTester(config.hsic_sample_cap),
            config.subset_cap,
            config.threads,
        )
    except SubsetBudgetExceeded as exc:
        print(
            f"error: {exc}. The variables left unordered by the whole-set pass "
            f"need 2^{exc.d} subset runs; raise --subset-cap (cost doubles per "
            f"variable) or use --hsic-cap to cheapen each test.",
            file=sys.stderr,
        )
        return EXIT_BUDGET
    for w in result.trace.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if config.output_format == "csv":
        _write(_ordering_csv(names, result.ordering.entries), args.out)
        return EXIT_OK
    body = result.to_dict()
    doc = {
        "schema": SCHEMA,
        "config": {**asdict(config), "input": str(args.input), "transpose": bool(args.transpose)},
        "variables": names,
        **body,
    }
    _write(dump_json(doc), args.out)
    return EXIT_OK


def _load_spec(path: str) -> SemSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    try:
        return SemSpec.from_toml(text)
    except InvalidSpec as exc:
        raise InputError(f"{path}: invalid spec: {exc}") from None


def truth_path(out_csv: str) -> Path:
    p = Path(out_csv)
    return p.with_name(p.stem + ".truth.json")


def cmd_simulate(args) -> int:
    spec = _load_spec(args.spec)
    if args.seed is not None:
        spec = spec.with_seed(args.seed)
    if args.n < 3:
        raise InputError("n must be at least 3")
    X, truth = generate(spec, args.n)
    names = [f"x{i}" for i in range(spec.d)]
    Path(args.out).write_text(data_to_csv(X, names), encoding="utf-8")
    doc = {"variables": names, **truth.to_dict(), "spec": spec.name}
    truth_path(args.out).write_text(dump_json(doc), encoding="utf-8")
    return EXIT_OK


def cmd_export_spec(args) -> int:
    try:
        spec = builtin_network(args.network, seed=args.seed)
    except UnknownNetwork as exc:
        raise InputError(f"{exc}; choose from {', '.join(BUILTIN_NETWORKS)}") from None
    _write(spec.to_toml(), args.out)
    return EXIT_OK


def trial_seed(seed: int, *keys: int) -> int:
    """Per-trial data seed derived from the run seed and the cell keys."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def _run_trial(network, dim, n, t, config):
    spec = builtin_network(network, seed=trial_seed(config.seed, dim, n, t))
    X, truth = generate(spec, n)
    tester = HsicTester(config.hsic_sample_cap)
    out = {}
    for method, run in (
        ("ParceLiNGAM", lambda: algorithm3(X, config.alpha, tester, config.subset_cap)),
        ("DirectLiNGAM-equivalent", lambda: direct_lingam(X, tester)),
    ):
        start = time.perf_counter()
        result = run()
        elapsed = time.perf_counter() - start
        out[method] = (score_result(result, truth, config.exclude_path_free), elapsed)
    return out


TABLE_FIELDS = [
    "method", "network", "dim", "n", "trials", "precision", "recall", "f_measure",
    "max_recall", "max_f_measure", "rmse", "undefined_precision", "mean_seconds", "wall_seconds",
]


def benchmark_table(out_dir: Path, trials: int, dims, sizes, config: RunConfig) -> Path:
    """Method comparison grid: one CSV row per (method, dim, n) cell, plus a
    mean per-trial wall-clock column. Rows are flushed as cells finish."""
    path = out_dir / "table1_4_desk.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=TABLE_FIELDS, lineterminator="\n")
        writer.writeheader()
        fh.flush()
        for dim in dims:
            network = DESK_NETWORKS[dim]
            mr = max_recall(builtin_network(network), config.exclude_path_free)
            max_f = 2 * mr / (1 + mr) if mr else 0.0
            for n in sizes:
                start = time.perf_counter()

                def job(t, dim=dim, n=n, network=network):
                    return _run_trial(network, dim, n, t, config)

                if config.threads > 1:
                    with ThreadPoolExecutor(max_workers=config.threads) as pool:
                        results = list(pool.map(job, range(trials)))
                else:
                    results = [job(t) for t in range(trials)]
                wall = time.perf_counter() - start
                for method in ("ParceLiNGAM", "DirectLiNGAM-equivalent"):
                    reports = [r[method][0] for r in results]
                    m = mean_report(reports)
                    row = {
                        "method": method,
                        "network": network,
                        "dim": dim,
                        "n": n,
                        "trials": trials,
                        "precision": m["precision"],
                        "recall": m["recall"],
                        "f_measure": m["f_measure"],
                        "max_recall": mr,
                        "max_f_measure": max_f,
                        "rmse": m["rmse"],
                        "undefined_precision": m["undefined_precision"],
                        "mean_seconds": float(np.mean([r[method][1] for r in results])),
                        "wall_seconds": wall,
                    }
                    writer.writerow({k: _cell(v) for k, v in row.items()})
                fh.flush()
                logger.info("cell dim=%d n=%d done: %d trials in %.1f s", dim, n, trials, wall)
    return path


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6f}"
    return v


CALIBRATION_FIELDS = ["check", "value", "low", "high", "passed"]


def benchmark_calibration(out_dir: Path, trials: int, config: RunConfig) -> Path:
    """Residual-independence property rates and HSIC calibration, pass/fail."""
    path = out_dir / "lemma_calibration.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CALIBRATION_FIELDS, lineterminator="\n")
        writer.writeheader()

        def emit(check, value, low, high):
            passed = low <= value <= high
            writer.writerow(
                {"check": check, "value": f"{value:.4f}", "low": low, "high": high, "passed": passed}
            )
            fh.flush()
            logger.info("%s = %.4f [%s]", check, value, "pass" if passed else "FAIL")

        for key, rate in lemma_rates(2000, trials, config.seed, config.alpha).items():
            emit(f"lemma_{key}", rate, 0.85 if key.endswith("accepted") else 0.9, 1.0)
        for n in (100, 500):
            null = hsic_null_rate(n, 500, config.seed, config.alpha)
            emit(f"hsic_null_rate_n{n}", null, 0.02, 0.09)
            gamma, perm = hsic_gamma_vs_permutation(n, 50, 1000, config.seed, config.alpha)
            emit(f"hsic_gamma_minus_permutation_n{n}", gamma - perm, -0.04, 0.04)
    return path


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"expected comma-separated integers, got {text!r}") from None


def cmd_benchmark(args) -> int:
    config = RunConfig(
        alpha=args.alpha,
        seed=args.seed,
        subset_cap=args.subset_cap,
        hsic_sample_cap=args.hsic_cap,
        threads=resolve_threads(args.threads),
        exclude_path_free=args.exclude_path_free,
    )
    config.validate()
    if args.trials < 1:
        raise InputError("trials must be at least 1")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.suite == "table1_4_desk":
        dims = _int_list(args.dims)
        bad = [d for d in dims if d not in DESK_NETWORKS]
        if bad:
            raise InputError(f"no desk network for dim {bad}; choose from {sorted(DESK_NETWORKS)}")
        path = benchmark_table(out_dir, args.trials, dims, _int_list(args.sizes), config)
    else:
        path = benchmark_calibration(out_dir, args.trials, config)
    print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parcelingam",
        description="Causal orderings under latent confounding (ParceLiNGAM).",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--alpha", type=float, default=0.05)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--subset-cap", type=int, default=15)
        p.add_argument("--hsic-cap", type=int, default=None, help="max samples per HSIC test")
        p.add_argument("--threads", default=None, help=f"integer or 'auto'; {THREADS_ENV} overrides")

    p = sub.add_parser("discover", help="estimate causal orders from a CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--transpose", action="store_true", help="variables are rows")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    common(p)
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("simulate", help="generate data from a TOML spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="overrides the spec's seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("export-spec", help="write a builtin network as TOML")
    p.add_argument("--network", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_export_spec)

    p = sub.add_parser("benchmark", help="run a benchmark suite")
    p.add_argument("--suite", choices=("table1_4_desk", "lemma_calibration"), required=True)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--dims", default="5", help="comma-separated: 5, 10, 15")
    p.add_argument("--sizes", default="500,1000,1500")
    p.add_argument("--exclude-path-free", action="store_true")
    common(p)
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
