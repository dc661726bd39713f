"""Command-line interface: ``hmmar <command> [flags]``.

Exit codes: 0 ok, 2 invalid input, 3 I/O failure, 4 fit failure,
5 unsupported order, 6 oracle failure.  Every output file is written to a
temporary name and renamed into place only on success.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from hmmar import _io
from hmmar.errors import (
    AllRestartsFailed,
    ConditionViolated,
    DimensionMismatch,
    HmMarError,
    InsufficientData,
    InvalidModel,
    InvalidSeries,
    NonErgodicChain,
    UnsupportedOrder,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_IO = 3
EXIT_FIT = 4
EXIT_ORDER = 5
EXIT_ORACLE = 6

ORACLE_MAX_K = 3
ORACLE_MAX_N = 12


class _InputError(Exception):
    pass


def _load_model(path):
    from hmmar.model import HmMarModel

    return HmMarModel.load(path).check()


def _stem_path(out: Path, suffix: str) -> Path:
    return out.with_name(out.stem + suffix)


def cmd_simulate(args) -> int:
    from hmmar.simulate import SimulationConfig, simulate, simulate_ensemble, write_series_csv

    model = _load_model(args.model)
    cfg = SimulationConfig(n=args.n, seed=args.seed, emit_latent=args.emit_latent, noise_seed=args.noise_seed)
    cfg.check(model)
    z_of = lambda res, i=None: (res.z if i is None else res.z[i]) if args.emit_latent else None  # noqa: E731
    if args.replicates is None:
        res = simulate(model, cfg)
        write_series_csv(args.out, res.observations, z_of(res))
        return EXIT_OK
    if args.replicates < 1:
        raise _InputError("--replicates must be >= 1")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ens = simulate_ensemble(model, cfg, args.replicates)
    for i in range(args.replicates):
        write_series_csv(out_dir / f"rep_{i}.csv", ens.y[i, model.p :], z_of(ens, i))
    return EXIT_OK


def cmd_fit(args) -> int:
    from hmmar.estimation import FitConfig, fit, posterior_csv
    from hmmar.simulate import read_series_csv

    y = read_series_csv(args.series)
    try:
        config = FitConfig(
            k=args.k, p=args.p, mode=args.mode, max_iter=args.max_iter, tol=args.tol, restarts=args.restarts, seed=args.seed
        )
    except ValueError as exc:
        raise _InputError(str(exc)) from exc
    result = fit(y, config)
    out = Path(args.out)
    diag = Path(args.diagnostics) if args.diagnostics else _stem_path(out, ".diagnostics.json")
    result.save(out, diag)
    if args.posteriors:
        smoothed, pairwise = posterior_csv(result)
        _io.atomic_write_text(_stem_path(out, ".smoothed.csv"), smoothed)
        _io.atomic_write_text(_stem_path(out, ".pairwise.csv"), pairwise)
    print(f"loglik={_io.fmt(result.log_likelihood)}")
    return EXIT_OK


def forecast_csv(rf) -> str:
    lines = ["t,y,mean,variance,abs_error"]
    for t, y, m, v, e in zip(rf.t, rf.y, rf.mean, rf.variance, rf.abs_error):
        lines.append(f"{int(t)},{_io.fmt(y)},{_io.fmt(m)},{_io.fmt(v)},{_io.fmt(e)}")
    lines.append(f"total_abs_error={_io.fmt(rf.total_abs_error)}")
    return "\n".join(lines) + "\n"


def cmd_forecast(args) -> int:
    from hmmar.filtering import rolling_forecast
    from hmmar.simulate import read_series_csv

    model = _load_model(args.model)
    y = read_series_csv(args.series)
    rf = rolling_forecast(model, y)
    _io.atomic_write_text(args.out, forecast_csv(rf))
    print(f"total_abs_error={_io.fmt(rf.total_abs_error)}")
    return EXIT_OK


def cmd_stability(args) -> int:
    from hmmar.stability import analyze

    model = _load_model(args.model)
    report = analyze(model)
    if args.out:
        _io.atomic_write_text(args.out, _io.dumps(report.to_dict()) + "\n")
    print(report.verdict())
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    from hmmar.benchmark import run_benchmark

    model = _load_model(args.model)
    if args.replicates < 1 or args.n < 1:
        raise _InputError("--replicates and --n must be >= 1")
    result = run_benchmark(model, replicates=args.replicates, n=args.n, seed=args.seed, restarts=args.restarts)
    _io.atomic_write_text(args.out, result.to_csv())
    s = result.summary()
    print(
        f"wins={result.wins} replicates={result.replicates} failed={len(result.failures)} "
        f"hmm_mean={_io.fmt(s['hmm']['mean'])} iid_mean={_io.fmt(s['iid']['mean'])}"
    )
    return EXIT_OK


def cmd_oracle(args) -> int:
    from hmmar.oracles import run_oracle_suite

    if not 1 <= args.k <= ORACLE_MAX_K:
        raise _InputError(f"--k must be between 1 and {ORACLE_MAX_K} (path enumeration bound), got {args.k}")
    if not 2 <= args.n <= ORACLE_MAX_N:
        raise _InputError(f"--n must be between 2 and {ORACLE_MAX_N} (path enumeration bound), got {args.n}")
    checks = run_oracle_suite(
        max_k=args.k, max_n=args.n, models=args.models, seed=args.seed, inject_fault=args.inject_fault
    )
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {c.name}: max_abs_dev={c.max_abs_dev:.3e} tol={c.tolerance:.0e}")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_ORACLE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hmmar", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate series from a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="CSV path, or a directory with --replicates")
    p.add_argument("--emit-latent", action="store_true", help="add the regime column z")
    p.add_argument("--replicates", type=int, help="write rep_<i>.csv files into --out")
    p.add_argument("--noise-seed", type=int, help="override the noise substream seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a model by EM")
    p.add_argument("--series", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--mode", choices=("hmm", "iid"), required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", default="fitted_model.json", help="fitted model JSON")
    p.add_argument("--diagnostics", help="diagnostics JSON (default: <out>.diagnostics.json)")
    p.add_argument("--posteriors", action="store_true", help="also write <out>.smoothed.csv and <out>.pairwise.csv")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("forecast", help="rolling one-step forecasts")
    p.add_argument("--model", required=True)
    p.add_argument("--series", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("stability", help="moment-stability report for a p = 1 model")
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="report JSON")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("benchmark", help="HM-MAR vs MAR forecast errors on simulated data")
    p.add_argument("--model", required=True)
    p.add_argument("--replicates", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("oracle", help="brute-force verification of closed forms and the filter")
    p.add_argument("--k", type=int, default=ORACLE_MAX_K, help=f"largest K (<= {ORACLE_MAX_K})")
    p.add_argument("--n", type=int, default=ORACLE_MAX_N, help=f"largest series length (<= {ORACLE_MAX_N})")
    p.add_argument("--models", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-fault", action="store_true", help="flip the lag-1 sign in the closed-form route")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UnsupportedOrder as exc:
        code, msg = EXIT_ORDER, str(exc)
    except AllRestartsFailed as exc:
        code, msg = EXIT_FIT, str(exc)
    except (_InputError, InvalidModel, InvalidSeries, DimensionMismatch, NonErgodicChain, InsufficientData) as exc:
        code, msg = EXIT_INVALID, str(exc)
    except ConditionViolated as exc:
        code, msg = EXIT_INVALID, str(exc)
    except OSError as exc:
        code, msg = EXIT_IO, f"{exc.strerror or exc}: {exc.filename or ''}".rstrip(": ")
    except (HmMarError, ValueError) as exc:
        code, msg = EXIT_INVALID, str(exc)
    print(f"hmmar: error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
