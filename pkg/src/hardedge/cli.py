"""Command-line entry point ``hardedge``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 statistical-check failure (including a failed split-half control).
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .config import load_config, parse_override
from .errors import ConfigError, HardEdgeError, NumericalError, StatisticalCheckFailure
from .hamiltonian import HamiltonianParams, minimize
from .harness import manifest, run_experiment
from .potential import ScalingFunctions, validate_potential
from .sampler import (
    ChainConfig,
    derive_stream_seed,
    read_frame,
    sample_laguerre_batch,
    sample_mcmc_arrays,
    write_csv,
    write_frame,
)
from .spectra import hard_edge_factor, make_sbo_grid, sbo_spectrum, smallest_eigs

__all__ = ["main"]


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _write_rows(path, header, rows):
    fh, close = _open_out(path)
    try:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    finally:
        if close:
            fh.close()


def _params(args):
    return HamiltonianParams(validate_potential(args.potential), args.beta, args.a, args.n)


# -- subcommands --------------------------------------------------------------

def cmd_phi(args):
    if args.grid < 2:
        raise ConfigError("--grid must be >= 2")
    sf = ScalingFunctions(validate_potential(args.potential))
    t = np.linspace(0.0, 1.0, args.grid)
    phi = np.asarray(sf.phi(t))
    theta = np.asarray(sf.theta(t))
    rows = [(float(a), float(b), float(c), sf.kappa) for a, b, c in zip(t, phi, theta)]
    _write_rows(args.out, ["t", "phi", "theta", "kappa"], rows)
    return 0


def cmd_minimize(args):
    res = minimize(_params(args))
    y = np.append(res.y, np.nan)
    _write_rows(args.out, ["k", "x", "y"], [(k + 1, float(res.x[k]), float(y[k])) for k in range(args.n)])
    print(f"converged in {res.iterations} iterations, |grad| = {res.grad_norm:.3e}", file=sys.stderr)
    return 0


def cmd_sample(args):
    params = _params(args)
    if args.method == "exact":
        X, Y = sample_laguerre_batch(params, np.random.default_rng(args.seed), args.count)
    else:
        cc = ChainConfig(burn_in=args.burn_in, thin=args.thin, seed=args.seed, n_chains=args.chains)
        X, Y, meta = sample_mcmc_arrays(params, cc, args.count)
        print(json.dumps({k: v for k, v in meta.items()}, default=float), file=sys.stderr)
    if args.out.endswith(".csv"):
        write_csv(args.out, X, Y)
    else:
        write_frame(args.out, params, X, Y, seed=args.seed)
    return 0


def cmd_spectrum(args):
    params, X, Y, _ = read_frame(args.frame)
    factor = hard_edge_factor(params.scaling.kappa, params.n, args.convention)
    rows = []
    for s, (x, y) in enumerate(zip(X, Y)):
        lam = smallest_eigs((x, y), args.k).values
        rows.append([s, factor, *(lam * factor)])
    _write_rows(args.out, ["sample", "rescale_factor"] + [f"lambda{i}" for i in range(1, args.k + 1)], rows)
    return 0


def cmd_sbo(args):
    grid = make_sbo_grid(args.M, args.beta, args.a, "laguerre_native", eps=args.eps)
    rows = []
    for r in range(args.count):
        rng = np.random.default_rng(derive_stream_seed(args.seed, r))
        rows.append([r, *sbo_spectrum(grid, None, rng, args.k).values])
    _write_rows(args.out, ["draw"] + [f"Lambda{i}" for i in range(1, args.k + 1)], rows)
    return 0


def _write_samples_csv(path, sets):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        k = next(iter(sets.values())).shape[1]
        w.writerow(["ensemble", "replica"] + [f"value{i}" for i in range(1, k + 1)])
        for name, vals in sets.items():
            for r, row in enumerate(vals):
                w.writerow([name, r, *(repr(float(v)) for v in row)])


def cmd_experiment(args):
    overrides = dict(parse_override(s) for s in args.set or [])
    overrides["experiment"] = args.command
    if args.out is not None:
        overrides["output_dir"] = args.out
    cfg = load_config(args.config, overrides)
    report = run_experiment(cfg)
    os.makedirs(cfg.output_dir, exist_ok=True)
    stem = os.path.join(cfg.output_dir, cfg.experiment.replace("-", "_"))
    with open(stem + "_report.json", "w") as fh:
        fh.write(report.to_json())
    with open(stem + "_manifest.json", "w") as fh:
        json.dump(manifest(cfg, report.provenance.get("seeds", {})), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if getattr(report, "samples", None):
        _write_samples_csv(stem + "_values.csv", report.samples)
    for c in report.checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}: {c['value']}", file=sys.stderr)
    if report.control_failed:
        raise StatisticalCheckFailure("split-half control failed; run is invalid")
    if not report.verdict:
        print("verdict: fail", file=sys.stderr)
        return 3
    print("verdict: pass", file=sys.stderr)
    return 0


def cmd_selftest(args):
    from . import selftest

    results = selftest.run_all()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 2


# -- parser -------------------------------------------------------------------

def _add_model(p, n_default=100):
    p.add_argument("--potential", type=float, nargs="+", default=[0.5], help="coefficients g_1..g_d")
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--n", type=int, default=n_default)


def build_parser():
    parser = argparse.ArgumentParser(prog="hardedge", description="Hard-edge beta-ensemble experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phi", help="tabulate phi, theta and kappa as CSV")
    p.add_argument("--potential", type=float, nargs="+", default=[0.5])
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_phi)

    p = sub.add_parser("minimize", help="global minimizer of H as CSV")
    _add_model(p)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_minimize)

    p = sub.add_parser("sample", help="draw bidiagonal samples (.csv or binary frame)")
    _add_model(p)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=("exact", "mcmc"), default="exact")
    p.add_argument("--burn-in", type=int, default=None)
    p.add_argument("--thin", type=int, default=None)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("spectrum", help="rescaled smallest eigenvalues of a sample frame")
    p.add_argument("--frame", required=True)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--convention", choices=("corrected", "literal"), default="corrected")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("sbo", help="Monte-Carlo SBO eigenvalue draws")
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--M", type=int, default=1000)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_sbo)

    for name in ("universality", "mean-check", "var-check", "clt-check"):
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", default=None, help="key = value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override")
        p.add_argument("--out", default=None, help="output directory")
        p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("selftest", help="run the deterministic oracles")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        return args.func(args)
    except StatisticalCheckFailure as exc:
        print(f"statistical check failed: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (HardEdgeError, OSError, ValueError) as exc:
        print(f"configuration error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
