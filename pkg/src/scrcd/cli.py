"""Benchmark command line: experiment orchestration and artifact emission.

Subcommands: ``synth`` (flat-tail synthetic psd system), ``krr`` (kernel ridge
regression on a CSV dataset), ``rates`` (small-instance contraction bounds vs.
Monte Carlo measurements), ``ls`` (least-squares driver), and ``report``
(collect a directory of trace CSVs into one table).

Configuration comes from an optional JSON file plus command-line flags; flags
win.  Unknown configuration keys are rejected before any work starts.  Every
run writes one trace CSV per solver and a ``summary.json`` embedding the
resolved configuration; failures print a machine-readable error JSON.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import baselines, solver
from ._linalg import inv_sqrtm_pd
from .krr import krr_solve, load_table
from .least_squares import ls_solve, randomly_pivoted_qr
from .matrix_core import synth_spectrum_source
from .nystrom import best_of_t, rpcholesky
from .sketch_project import rate_bounds
from .solver import SolveOptions
from .trace import read_trace_csv, write_summary_json


class ConfigError(ValueError):
    """Invalid experiment configuration (bad key, missing field, bad value)."""


EXPERIMENTS = ("synth", "krr", "rates", "ls")
_TOP_KEYS = {"experiment", "seed", "output_dir", "matrix", "solvers"}
_SOLVER_KEYS = {
    "method",
    "label",
    "d",
    "block_size",
    "sampling",
    "inner",
    "inner_rel_tol",
    "boost",
    "stop_tol",
    "max_epochs",
    "checkpoint_every",
    "lam",
}
_MATRIX_KEYS = {
    "synth": {"n", "r", "decay"},
    "krr": {"data", "target", "sigma", "lambda_coeff", "max_rows", "standardize"},
    "rates": {"n", "d", "block_sizes", "trials"},
    "ls": {"m", "n", "d"},
}


def _check_keys(mapping: dict, allowed: set, context: str) -> None:
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {context}")


@dataclass
class SolverConfig:
    method: str
    label: str = ""
    d: int = 0
    block_size: int = 1
    sampling: str = "diag_no_replace"
    inner: str = "direct"
    inner_rel_tol: float = 0.05
    boost: int = 1
    stop_tol: float = 1e-8
    max_epochs: float = 100.0
    checkpoint_every: int | None = None
    lam: float | None = None

    def __post_init__(self):
        if self.method not in ("scrcd", "rcd", "cg", "pcg"):
            raise ConfigError(f"unknown solver method {self.method!r}")
        if not self.label:
            self.label = self.method
        if self.boost < 1:
            raise ConfigError("boost must be at least 1")

    def options(self, seed: int) -> SolveOptions:
        return SolveOptions(
            block_size=self.block_size,
            sampling_mode=self.sampling,
            inner_mode=self.inner,
            inner_rel_tol=self.inner_rel_tol,
            stop_tol=self.stop_tol,
            max_epochs=self.max_epochs,
            checkpoint_every=self.checkpoint_every,
            seed=seed,
        )


@dataclass
class ExperimentConfig:
    experiment: str
    matrix: dict
    solvers: list[SolverConfig] = field(default_factory=list)
    seed: int = 0
    output_dir: str = "scrcd-out"

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        _check_keys(raw, _TOP_KEYS, "configuration")
        experiment = raw.get("experiment")
        if experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")
        matrix = dict(raw.get("matrix", {}))
        _check_keys(matrix, _MATRIX_KEYS[experiment], f"{experiment} matrix settings")
        solvers = []
        for entry in raw.get("solvers", []):
            _check_keys(entry, _SOLVER_KEYS, "solver settings")
            solvers.append(SolverConfig(**entry))
        return cls(
            experiment=experiment,
            matrix=matrix,
            solvers=solvers,
            seed=int(raw.get("seed", 0)),
            output_dir=str(raw.get("output_dir", "scrcd-out")),
        )

    def resolved(self) -> dict:
        out = {
            "experiment": self.experiment,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "matrix": self.matrix,
            "solvers": [asdict(s) for s in self.solvers],
        }
        return out


def _sub_seeds(seed: int, count: int) -> list[int]:
    state = np.random.SeedSequence(seed).generate_state(count, dtype=np.uint64)
    return [int(v) for v in state]


def _pivot_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def _flat_tail_spectrum(n: int, r: int, decay: float) -> np.ndarray:
    lam = np.arange(1, n + 1, dtype=np.float64) ** -decay
    lam[:r] = 1.0
    return lam


def _write_spectrum_csv(path: Path, series: dict[str, np.ndarray]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "matrix", "eigenvalue"])
        for label, values in series.items():
            ordered = np.sort(np.asarray(values))[::-1]
            for i, value in enumerate(ordered):
                writer.writerow([i, label, repr(float(value))])


def _run_solver_on_system(src, b, cfg: SolverConfig, seed: int, index: int):
    if cfg.method == "scrcd":
        if cfg.d < 1:
            raise ConfigError("scrcd requires a positive approximation rank d")
        approx = best_of_t(src, cfg.d, cfg.boost, _pivot_rng(seed, index))
        return solver.solve(src, approx, b, cfg.options(seed)), approx
    if cfg.method == "rcd":
        return baselines.block_rcd_solve(src, b, cfg.options(seed)), None
    if cfg.method == "cg":
        return baselines.cg_solve(src, b, cfg.options(seed)), None
    if cfg.method == "pcg":
        if cfg.lam is None or cfg.lam <= 0:
            raise ConfigError("pcg requires a positive 'lam' solver setting")
        if cfg.d < 1:
            raise ConfigError("pcg requires a positive approximation rank d")
        approx = best_of_t(src, cfg.d, cfg.boost, _pivot_rng(seed, index))
        return baselines.nystrom_pcg_solve(src, b, approx, cfg.lam, cfg.options(seed)), approx
    raise ConfigError(f"unknown solver method {cfg.method!r}")


def _emit(config: ExperimentConfig, outdir: Path, solver_rows: list[dict], extra: dict | None = None) -> None:
    payload = {
        "experiment": config.experiment,
        "config": config.resolved(),
        "solvers": solver_rows,
    }
    if extra:
        payload.update(extra)
    write_summary_json(outdir / "summary.json", payload)


def _solver_row(cfg: SolverConfig, trace, trace_path: Path) -> dict:
    return {
        "name": cfg.label,
        "status": trace.status,
        "iterations": trace.iterations,
        "epochs": trace.epochs,
        "final_rel_residual": trace.final_rel_residual,
        "trace_path": trace_path.name,
    }


def _run_synth(config: ExperimentConfig, outdir: Path) -> int:
    matrix = config.matrix
    n = int(matrix.get("n", 256))
    r = int(matrix.get("r", max(1, n // 20)))
    decay = float(matrix.get("decay", 1.5))
    if not config.solvers:
        raise ConfigError("no solvers configured")
    matrix_seed, b_seed = _sub_seeds(config.seed, 2)
    lam = _flat_tail_spectrum(n, r, decay)
    src = synth_spectrum_source(n, lam, seed=matrix_seed)
    b = np.random.default_rng(b_seed).standard_normal(n)
    for cfg in config.solvers:
        if cfg.method in ("scrcd", "pcg") and cfg.d < 1:
            cfg.d = max(1, n // 10)

    rows = []
    spectra: dict[str, np.ndarray] = {"A": lam}
    for index, cfg in enumerate(config.solvers):
        (x, trace), approx = _run_solver_on_system(src, b, cfg, config.seed, index)
        trace_path = outdir / f"trace_{cfg.label}.csv"
        trace.write_csv(trace_path)
        rows.append(_solver_row(cfg, trace, trace_path))
        if approx is not None and cfg.method == "scrcd" and "residual" not in spectra:
            residual = src.dense() - approx.factor @ approx.factor.T
            spectra["residual"] = np.linalg.eigvalsh(residual)
        if approx is not None and cfg.method == "pcg" and "preconditioned" not in spectra:
            m_inv_half = inv_sqrtm_pd(approx.factor @ approx.factor.T + cfg.lam * np.eye(n))
            preconditioned = cfg.lam * (m_inv_half @ src.dense() @ m_inv_half)
            spectra["preconditioned"] = np.linalg.eigvalsh(preconditioned)
    _write_spectrum_csv(outdir / "spectrum.csv", spectra)
    _emit(config, outdir, rows)
    return 0


def _run_krr(config: ExperimentConfig, outdir: Path) -> int:
    matrix = config.matrix
    if "data" not in matrix or "target" not in matrix:
        raise ConfigError("krr requires 'data' and 'target' matrix settings")
    if not config.solvers:
        raise ConfigError("no solvers configured")
    sigma = float(matrix.get("sigma", 3.0))
    lambda_coeff = float(matrix.get("lambda_coeff", 1e-6))
    max_rows = matrix.get("max_rows")
    ds = load_table(
        matrix["data"],
        matrix["target"],
        max_rows=int(max_rows) if max_rows is not None else None,
        seed=config.seed,
    )
    lam = lambda_coeff * ds.size
    rows = []
    for cfg in config.solvers:
        x, trace = krr_solve(
            ds,
            sigma,
            lam,
            cfg.method,
            cfg.d,
            cfg.options(config.seed),
            standardize_features=bool(matrix.get("standardize", True)),
        )
        trace_path = outdir / f"trace_{cfg.label}.csv"
        trace.write_csv(trace_path)
        rows.append(_solver_row(cfg, trace, trace_path))
    _emit(config, outdir, rows, extra={"lam": lam, "rows": ds.size})
    return 0


def _run_rates(config: ExperimentConfig, outdir: Path) -> int:
    matrix = config.matrix
    n = int(matrix.get("n", 32))
    d = int(matrix.get("d", max(1, n // 5)))
    block_sizes = [int(v) for v in matrix.get("block_sizes", [1, 2, 4])]
    trials = int(matrix.get("trials", 5000))
    matrix_seed, b_seed = _sub_seeds(config.seed, 2)
    lam_spec = np.arange(1, n + 1, dtype=np.float64) ** -1.5
    src = synth_spectrum_source(n, lam_spec, seed=matrix_seed)
    a = src.dense()
    b = a @ np.random.default_rng(b_seed).standard_normal(n)
    approx = rpcholesky(src, d, _pivot_rng(config.seed, 0))
    x_star = np.linalg.solve(a, b)
    state0 = solver.init(src, approx, b)
    base_err = state0.x - x_star
    base = float(base_err @ a @ base_err)
    rng = np.random.default_rng(config.seed)

    pairs = []
    for block_size in block_sizes:
        bound = rate_bounds(a, approx.pivots, block_size).scrcd_rate
        ratios = np.empty(trials)
        options = SolveOptions(block_size=block_size)
        for t in range(trials):
            state = state0.copy()
            block = solver.sample_block(state.weights, block_size, "diag_iid", rng)
            solver.step(state, src, approx, block, options)
            err = state.x - x_star
            ratios[t] = float(err @ a @ err) / base
        stderr = float(ratios.std(ddof=1) / np.sqrt(trials))
        pairs.append(
            {
                "block_size": block_size,
                "measured": float(ratios.mean()),
                "bound": float(bound),
                "stderr": stderr,
            }
        )
    residual = a - approx.factor @ approx.factor.T
    _write_spectrum_csv(
        outdir / "spectrum.csv",
        {"A": np.linalg.eigvalsh(a), "residual": np.linalg.eigvalsh(residual)},
    )
    _emit(config, outdir, [], extra={"contraction_pairs": pairs})
    return 0


def _run_ls(config: ExperimentConfig, outdir: Path) -> int:
    matrix = config.matrix
    m = int(matrix.get("m", 200))
    n = int(matrix.get("n", 50))
    cfg = config.solvers[0] if config.solvers else SolverConfig(method="scrcd", label="ls_scrcd")
    d = int(matrix.get("d", cfg.d if cfg.d >= 1 else max(1, n // 5)))
    a_seed, b_seed = _sub_seeds(config.seed, 2)
    a = np.random.default_rng(a_seed).standard_normal((m, n))
    b = np.random.default_rng(b_seed).standard_normal(m)
    approx = randomly_pivoted_qr(a, d, _pivot_rng(config.seed, 0))
    options = cfg.options(config.seed)
    x, trace = ls_solve(a, b, approx, options)
    trace_path = outdir / f"trace_{cfg.label}.csv"
    trace.write_csv(trace_path)
    _emit(config, outdir, [_solver_row(cfg, trace, trace_path)], extra={"shape": [m, n], "rank": approx.rank})
    return 0


def _run_report(directory: Path, out_path: Path) -> int:
    rows = []
    for candidate in sorted(directory.glob("*.csv")):
        try:
            trace = read_trace_csv(candidate)
        except ValueError:
            continue
        if not trace.records:
            continue
        last = trace.records[-1]
        rows.append([candidate.name, len(trace.records), last.iteration, repr(last.epoch), repr(last.rel_residual), repr(last.elapsed_seconds)])
    if not rows:
        raise ConfigError(f"no trace CSVs found in {directory}")
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trace", "checkpoints", "iterations", "epochs", "final_rel_residual", "elapsed_seconds"])
        writer.writerows(rows)
    return 0


def run(config: ExperimentConfig) -> int:
    """Execute one experiment and write its artifacts to the output directory."""
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    runner = {
        "synth": _run_synth,
        "krr": _run_krr,
        "rates": _run_rates,
        "ls": _run_ls,
    }[config.experiment]
    return runner(config, outdir)


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON configuration file; flags override it")
    parser.add_argument("--out", type=str, help="output directory")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--methods", type=str, help="comma-separated solver methods")
    parser.add_argument("--d", type=int, help="approximation rank")
    parser.add_argument("--l", type=int, dest="block_size", help="block size")
    parser.add_argument("--sampling", choices=("diag_iid", "diag_no_replace", "uniform"))
    parser.add_argument("--inner", choices=("direct", "pcg"))
    parser.add_argument("--inner-rel-tol", type=float)
    parser.add_argument("--boost", type=int, help="number of boosted factorization runs")
    parser.add_argument("--stop-tol", type=float)
    parser.add_argument("--max-epochs", type=float)
    parser.add_argument("--checkpoint-every", type=int)
    parser.add_argument("--lam", type=float, help="ridge for the pcg preconditioner (synth)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scrcd", description="Randomized solver benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="flat-tail synthetic psd system")
    _add_common_flags(synth)
    synth.add_argument("--n", type=int)
    synth.add_argument("--r", type=int)
    synth.add_argument("--decay", type=float)

    krr = sub.add_parser("krr", help="kernel ridge regression on a CSV dataset")
    _add_common_flags(krr)
    krr.add_argument("--data", type=str)
    krr.add_argument("--target", type=str)
    krr.add_argument("--sigma", type=float)
    krr.add_argument("--lambda-coeff", type=float)
    krr.add_argument("--max-rows", type=int)
    krr.add_argument("--method", type=str, help="single solver method (alias for --methods)")
    krr.add_argument("--no-standardize", action="store_true")

    rates = sub.add_parser("rates", help="contraction bounds vs Monte Carlo measurements")
    _add_common_flags(rates)
    rates.add_argument("--n", type=int)
    rates.add_argument("--block-sizes", type=str, help="comma-separated block sizes")
    rates.add_argument("--trials", type=int)

    ls = sub.add_parser("ls", help="least-squares driver")
    _add_common_flags(ls)
    ls.add_argument("--m", type=int)
    ls.add_argument("--n", type=int)

    report = sub.add_parser("report", help="summarize a directory of trace CSVs")
    report.add_argument("--dir", type=Path, required=True)
    report.add_argument("--out-csv", type=Path, required=True)
    return parser


def _flag_solver_overrides(args) -> dict:
    overrides = {}
    for key, attr in (
        ("d", "d"),
        ("block_size", "block_size"),
        ("sampling", "sampling"),
        ("inner", "inner"),
        ("inner_rel_tol", "inner_rel_tol"),
        ("boost", "boost"),
        ("stop_tol", "stop_tol"),
        ("max_epochs", "max_epochs"),
        ("checkpoint_every", "checkpoint_every"),
        ("lam", "lam"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    return overrides


def _config_from_args(args) -> ExperimentConfig:
    raw: dict = {}
    if args.config is not None:
        with open(args.config) as fh:
            raw = json.load(fh)
    raw.setdefault("experiment", args.command)
    if raw.get("experiment") != args.command:
        raise ConfigError(f"config experiment {raw.get('experiment')!r} does not match subcommand {args.command!r}")
    if args.out is not None:
        raw["output_dir"] = args.out
    if args.seed is not None:
        raw["seed"] = args.seed

    matrix = dict(raw.get("matrix", {}))
    matrix_flags = {
        "synth": ("n", "r", "decay"),
        "krr": ("data", "target", "sigma", "max_rows"),
        "rates": ("n", "trials"),
        "ls": ("m", "n"),
    }[args.command]
    for name in matrix_flags:
        value = getattr(args, name, None)
        if value is not None:
            matrix[name] = value
    if args.command == "krr":
        if getattr(args, "lambda_coeff", None) is not None:
            matrix["lambda_coeff"] = args.lambda_coeff
        if getattr(args, "no_standardize", False):
            matrix["standardize"] = False
    if args.command == "rates":
        if getattr(args, "block_sizes", None) is not None:
            matrix["block_sizes"] = [int(v) for v in args.block_sizes.split(",")]
        if getattr(args, "d", None) is not None:
            matrix["d"] = args.d
    if args.command == "ls" and getattr(args, "d", None) is not None:
        matrix["d"] = args.d
    raw["matrix"] = matrix

    methods = getattr(args, "methods", None)
    if getattr(args, "method", None):
        methods = args.method
    overrides = _flag_solver_overrides(args)
    if methods is not None:
        raw["solvers"] = [{"method": m.strip(), **overrides} for m in methods.split(",") if m.strip()]
    elif raw.get("solvers"):
        raw["solvers"] = [{**entry, **overrides} for entry in raw["solvers"]]
    elif args.command in ("synth", "krr"):
        raw["solvers"] = [{"method": "scrcd", **overrides}]
    elif args.command == "ls":
        entry = {"method": "scrcd", "label": "ls_scrcd"}
        entry.update(overrides)
        raw["solvers"] = [entry]
    return ExperimentConfig.from_dict(raw)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "report":
            return _run_report(args.dir, args.out_csv)
        config = _config_from_args(args)
        return run(config)
    except ConfigError as exc:
        json.dump({"error": {"type": "config", "message": str(exc)}}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        json.dump({"error": {"type": type(exc).__name__, "message": str(exc)}}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
