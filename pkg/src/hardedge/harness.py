"""End-to-end statistical experiments and the utilities they share.

Every experiment takes an :class:`~hardedge.config.ExperimentConfig` and
returns a :class:`Report`.  Random streams are derived from the master seed
per ensemble and per replica, so a report is a pure function of its config.
"""
from __future__ import annotations

import json
import os
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy
from scipy import special, stats

from .config import FORMAT_VERSION, ExperimentConfig
from .errors import ConfigError, InsufficientReplicas
from .hamiltonian import (
    HamiltonianParams,
    alternating_eigenvalue,
    circulant_coarse_hessian,
    convexity_estimate,
    minimize,
)
from .potential import ScalingFunctions, validate_potential
from .sampler import ChainConfig, derive_stream_seed, sample_laguerre_batch, sample_mcmc_arrays
from .spectra import hard_edge_factor, make_sbo_grid, sbo_spectrum, smallest_eigs

__all__ = [
    "Report",
    "ks_statistic",
    "ks_critical",
    "bootstrap_ks_band",
    "split_half_control",
    "draw_samples",
    "model_eigenvalues",
    "sbo_eigenvalues",
    "limiting_mean",
    "run_universality",
    "run_mean_check",
    "run_variance_check",
    "run_clt_check",
    "run_experiment",
    "manifest",
]

SBO_STREAM = 10_000
_MCMC_CHUNK = 500
_EXACT = 1e-12


# -- statistics ---------------------------------------------------------------

def ks_statistic(sample_a, sample_b) -> float:
    """Two-sample Kolmogorov-Smirnov distance."""
    a = np.asarray(sample_a, dtype=float).ravel()
    b = np.asarray(sample_b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ConfigError("KS statistic needs two non-empty samples")
    return float(stats.ks_2samp(a, b).statistic)


def ks_critical(n1: int, n2: int, alpha: float) -> float:
    """Asymptotic two-sample KS critical value at level ``alpha``."""
    return float(special.kolmogi(alpha) * np.sqrt((n1 + n2) / (n1 * n2)))


def bootstrap_ks_band(a, b, rng, n_boot: int = 200, level: float = 0.95):
    """Percentile band of the KS distance under resampling both samples."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    vals = np.empty(n_boot)
    for i in range(n_boot):
        vals[i] = ks_statistic(rng.choice(a, a.size), rng.choice(b, b.size))
    lo, hi = np.quantile(vals, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


def split_half_control(sample, alpha: float) -> dict:
    """KS test between the two halves of a sample at level ``alpha``.

    Passes when the KS p-value (exact for small halves) is at least ``alpha``;
    the asymptotic critical distance is reported alongside.
    """
    sample = np.asarray(sample, dtype=float)
    h = sample.size // 2
    if h == 0:
        raise ConfigError("split-half control needs at least two values")
    res = stats.ks_2samp(sample[:h], sample[h:])
    crit = ks_critical(h, sample.size - h, alpha)
    return {"ks": float(res.statistic), "p_value": float(res.pvalue), "critical": crit,
            "alpha": alpha, "passed": bool(res.pvalue >= alpha)}


# -- reports ------------------------------------------------------------------

@dataclass
class Report:
    experiment: str
    checks: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    control_failed: bool = False

    def check(self, name, value, threshold, passed, **extra):
        self.checks.append({"name": name, "value": value, "threshold": threshold,
                            "passed": bool(passed), **extra})

    @property
    def verdict(self) -> bool:
        return all(c["passed"] for c in self.checks) and not self.control_failed

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "experiment": self.experiment,
            "verdict": "pass" if self.verdict else "fail",
            "control_failed": self.control_failed,
            "checks": self.checks,
            "data": self.data,
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("HARDNESS_THREADS", "1")))
    except ValueError:
        raise ConfigError("HARDNESS_THREADS must be an integer") from None


def _map(fn, items):
    """Map in index order, concurrently when ``HARDNESS_THREADS`` > 1."""
    items = list(items)
    workers = min(_threads(), len(items)) or 1
    if workers == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def manifest(cfg: ExperimentConfig, seeds: dict | None = None) -> dict:
    from . import __version__

    return _jsonable({
        "format_version": FORMAT_VERSION,
        "experiment": cfg.experiment,
        "config_hash": cfg.digest(),
        "config": cfg.to_dict(),
        "master_seed": cfg.master_seed,
        "seeds": seeds or {},
        "threads": _threads(),
        "versions": {
            "hardedge": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    })


# -- sampling and spectra -----------------------------------------------------

def draw_samples(params: HamiltonianParams, count: int, seed: int, cfg: ExperimentConfig):
    """``count`` independent draws ``(X, Y)``; exact for ``V = x/2``, else MALA.

    MALA uses ``cfg.mcmc_chains`` chains (default: one per draw) in batches of
    500, each batch seeded by ``derive_stream_seed(seed, batch)``.  The
    metadata records the Hessian floor at the minimizer and flags the
    marginal case ``beta = 1``.
    """
    model = {"convexity_estimate": convexity_estimate(params), "beta_one": params.beta == 1.0}
    if params.potential.is_linear_half():
        n = params.n
        X = np.empty((count, n))
        Y = np.empty((count, n - 1))
        for r in range(count):
            rng = np.random.default_rng(derive_stream_seed(seed, r))
            X[r], Y[r] = (v[0] for v in sample_laguerre_batch(params, rng, 1))
        return X, Y, {"method": "exact_chi", **model}
    chains = min(cfg.mcmc_chains or count, count)
    per_chain = -(-count // chains)
    batches = [(b, min(_MCMC_CHUNK, chains - b * _MCMC_CHUNK)) for b in range(-(-chains // _MCMC_CHUNK))]

    def run(batch):
        b, nc = batch
        cc = ChainConfig(burn_in=cfg.mcmc_burn_in, thin=cfg.mcmc_thin,
                         seed=derive_stream_seed(seed, b), n_chains=nc)
        X, Y, meta = sample_mcmc_arrays(params, cc, nc * per_chain)
        # regroup chain-major so replica order does not depend on batch size
        order = np.arange(nc * per_chain).reshape(per_chain, nc).T.ravel()
        return X[order], Y[order], meta

    parts = _map(run, batches)
    X = np.concatenate([p[0] for p in parts])[:count]
    Y = np.concatenate([p[1] for p in parts])[:count]
    meta = {"method": "mcmc", "batches": [p[2] for p in parts], **model}
    return X, Y, meta


def model_eigenvalues(X, Y, k: int):
    """Raw ``k`` smallest eigenvalues of ``B B^T`` per replica, shape ``(R, k)``."""
    return np.array(_map(lambda xy: smallest_eigs(xy, k).values, list(zip(X, Y))))


def sbo_eigenvalues(cfg: ExperimentConfig, count: int, seed: int, k: int):
    grid = make_sbo_grid(cfg.sbo_M, cfg.beta, cfg.a, "laguerre_native", eps=cfg.sbo_eps)

    def one(r):
        rng = np.random.default_rng(derive_stream_seed(seed, r))
        return sbo_spectrum(grid, None, rng, k).values

    return np.array(_map(one, range(count)))


# -- experiments --------------------------------------------------------------

def _label(g):
    return "V" + json.dumps([float(v) for v in g], separators=(",", ":"))


def run_universality(cfg: ExperimentConfig) -> Report:
    """Rescaled model eigenvalues across potentials versus SBO Monte-Carlo draws."""
    cfg.validate()
    if cfg.replicas < cfg.min_replicas:
        raise InsufficientReplicas(f"replicas = {cfg.replicas} < {cfg.min_replicas}")
    rep = Report("universality")
    n = cfg.sizes[-1]
    k = cfg.k
    sets, seeds, meta = {}, {}, {}
    for e, g in enumerate(cfg.potentials):
        params = HamiltonianParams(validate_potential(g), cfg.beta, cfg.a, n)
        seed = derive_stream_seed(cfg.master_seed, e)
        X, Y, smeta = draw_samples(params, cfg.replicas, seed, cfg)
        kappa = params.scaling.kappa
        factor = hard_edge_factor(kappa, n, cfg.kernel_convention)
        name = _label(g)
        sets[name] = model_eigenvalues(X, Y, k) * factor
        seeds[name] = seed
        meta[name] = {"kappa": kappa, "rescale_factor": factor, "n": n, "sampler": smeta}
    if cfg.sbo_target:
        seed = derive_stream_seed(cfg.master_seed, SBO_STREAM)
        sets["SBO"] = sbo_eigenvalues(cfg, cfg.sbo_replicas, seed, k)
        seeds["SBO"] = seed
        meta["SBO"] = {"M": cfg.sbo_M, "eps": cfg.sbo_eps, "rescale_factor": 1.0}
    names = list(sets)
    n_controls = len(names) * len(cfg.verdict_indices)
    alpha = cfg.control_alpha / n_controls
    controls = {}
    for name in names:
        for i in cfg.verdict_indices:
            c = split_half_control(sets[name][:, i - 1], alpha)
            controls[f"{name}/lambda{i}"] = c
            if not c["passed"]:
                rep.control_failed = True
    brng = np.random.default_rng(derive_stream_seed(cfg.master_seed, SBO_STREAM + 1))
    comparisons = []
    for ia in range(len(names)):
        for ib in range(ia + 1, len(names)):
            A, B = names[ia], names[ib]
            for i in range(1, k + 1):
                ks = ks_statistic(sets[A][:, i - 1], sets[B][:, i - 1])
                band = bootstrap_ks_band(sets[A][:, i - 1], sets[B][:, i - 1], brng, cfg.bootstrap)
                row = {"pair": [A, B], "index": i, "ks": ks, "band95": band,
                       "sizes": [len(sets[A]), len(sets[B])]}
                comparisons.append(row)
                if i in cfg.verdict_indices:
                    rep.check(f"KS {A} vs {B} lambda{i}", ks, cfg.ks_threshold, ks <= cfg.ks_threshold)
    rep.data = {
        "comparisons": comparisons,
        "controls": controls,
        "ensembles": meta,
        "means": {name: sets[name].mean(axis=0) for name in names},
    }
    rep.provenance = {"config_hash": cfg.digest(), "seeds": seeds}
    rep.samples = sets  # per-replica values for CSV export; not serialized
    return rep


def limiting_mean(sf: ScalingFunctions, a: float, s: float, t: float, sign: str = "corrected") -> float:
    """Limit of ``sum_{k=ns}^{nt} log(x_k / y_k)`` at the minimizer.

    ``"corrected"`` is ``(a/2 + 1/4) log(theta_t/theta_s) - (1/2) log(phi_t/phi_s)``;
    ``"literal"`` is its negative.
    """
    val = (0.5 * a + 0.25) * np.log(sf.theta(t) / sf.theta(s)) - 0.5 * np.log(sf.phi(t) / sf.phi(s))
    if sign == "corrected":
        return float(val)
    if sign == "literal":
        return float(-val)
    raise ConfigError(f"unknown sign convention {sign!r}")


def run_mean_check(cfg: ExperimentConfig) -> Report:
    """Minimizer log-ratio sums against the limiting mean, with the O(1/n) rate."""
    cfg.validate()
    rep = Report("mean-check")
    g = cfg.potentials[0]
    sf = ScalingFunctions(validate_potential(g))
    s, t = cfg.mean_s, cfg.mean_t
    if not 0 < s < t < 1:
        raise ConfigError("need 0 < mean_s < mean_t < 1")
    rhs = limiting_mean(sf, cfg.a, s, t)
    rows = []
    for n in cfg.sizes:
        res = minimize(HamiltonianParams(sf.potential, cfg.beta, cfg.a, n))
        lo, hi = int(np.floor(n * s)), int(np.floor(n * t))
        lhs = float(np.sum(np.log(res.x[lo - 1:hi] / res.y[lo - 1:hi])))
        rows.append({"n": n, "lhs": lhs, "rhs": rhs, "error": abs(lhs - rhs),
                     "rhs_literal": limiting_mean(sf, cfg.a, s, t, "literal")})
    for r0, r1 in zip(rows[:-1], rows[1:]):
        expected = r1["n"] / r0["n"]
        floor = _EXACT * (1 + abs(rhs))
        if r0["error"] <= floor and r1["error"] <= floor:
            # identity holds at every n (e.g. V = x/2, a = 0): no rate to measure
            rep.check(f"error ratio n={r0['n']}->{r1['n']}", None, expected, True,
                      tolerance=cfg.mean_rate_tol, note="exact at both sizes")
            continue
        ratio = r0["error"] / r1["error"] if r1["error"] > 0 else np.inf
        rel = abs(ratio / expected - 1)
        rep.check(f"error ratio n={r0['n']}->{r1['n']}", ratio, expected, rel <= cfg.mean_rate_tol,
                  tolerance=cfg.mean_rate_tol)
    last = rows[-1]
    rep.check(f"n*error at n={last['n']}", last["n"] * last["error"], None, np.isfinite(last["error"]))
    rep.data = {"rows": rows, "s": s, "t": t, "potential": g}
    rep.provenance = {"config_hash": cfg.digest()}
    return rep


def _block_variance(params, cfg, seed, i0, size):
    X, Y, smeta = draw_samples(params, cfg.replicas, seed, cfg)
    res = minimize(params)
    sl = slice(i0 - 1, i0 - 1 + size)
    S = (X[:, sl] - res.x[sl]).sum(axis=1) - (Y[:, sl] - res.y[sl]).sum(axis=1)
    sf = params.scaling
    t0 = i0 / params.n
    ratio_fn = float(sf.phi(t0) ** 2 * sf.theta_prime(t0) / sf.theta(t0))
    predicted = ratio_fn * size / (params.beta * params.n)
    return float(np.var(S, ddof=1)), predicted, smeta


def run_variance_check(cfg: ExperimentConfig) -> Report:
    """Variance of an alternating block sum, plus the circulant eigenvalue identity."""
    cfg.validate()
    rep = Report("var-check")
    g = cfg.potentials[0]
    n = cfg.sizes[-1]
    size = cfg.var_block or max(1, int(round(n ** 0.25)))
    i0 = cfg.var_start or n // 2
    if not 1 <= i0 <= n - size:
        raise ConfigError("variance block must lie inside [1, n-1]")
    params = HamiltonianParams(validate_potential(g), cfg.beta, cfg.a, n)
    seed = derive_stream_seed(cfg.master_seed, 0)
    emp, pred, smeta = _block_variance(params, cfg, seed, i0, size)
    rep.check("block variance ratio", emp / pred, [1 - cfg.var_tol, 1 + cfg.var_tol],
              abs(emp / pred - 1) <= cfg.var_tol, empirical=emp, predicted=pred)
    data = {"n": n, "block": [i0, i0 + size - 1], "empirical": emp, "predicted": pred,
            "convexity_estimate": smeta["convexity_estimate"], "beta_one": smeta["beta_one"]}
    if cfg.var_beta_scaling:
        p2 = HamiltonianParams(params.potential, 2 * cfg.beta, cfg.a, n)
        emp2, pred2, _ = _block_variance(p2, cfg, derive_stream_seed(cfg.master_seed, 1), i0, size)
        r_emp, r_pred = emp / emp2, pred / pred2
        rep.check("beta-doubling variance ratio", r_emp, r_pred,
                  abs(r_emp / r_pred - 1) <= cfg.var_beta_tol, tolerance=cfg.var_beta_tol)
        data["beta_doubled"] = {"empirical": emp2, "predicted": pred2}
    sf = params.scaling
    t0 = i0 / n
    Hc = circulant_coarse_hessian(sf.potential, t0, at=sf.phi(t0))
    v = (-1.0) ** np.arange(Hc.shape[0])
    lam = alternating_eigenvalue(sf, t0)
    resid = float(np.max(np.abs(Hc @ v - lam * v)))
    rep.check("circulant eigenvalue identity", resid, 1e-9, resid <= 1e-9, eigenvalue=lam)
    rep.data = data
    rep.provenance = {"config_hash": cfg.digest(), "seed": seed}
    return rep


def clt_statistics(X, Y, x0, y0, times):
    """``S(t) = sum_{k >= nt} log(X_k/x0_k) - log(Y_k/y0_k)`` per replica and time."""
    n = X.shape[1]
    lx = np.log(X / x0)
    ly = np.log(Y / y0)
    out = np.empty((X.shape[0], len(times)))
    for j, t in enumerate(times):
        k0 = int(np.floor(n * t))
        out[:, j] = lx[:, k0 - 1:].sum(axis=1) - ly[:, k0 - 1:].sum(axis=1)
    return out


def run_clt_check(cfg: ExperimentConfig) -> Report:
    """Gaussian limit of tail log-ratio sums around the minimizer."""
    cfg.validate()
    rep = Report("clt-check")
    g = cfg.potentials[0]
    n = cfg.sizes[-1]
    params = HamiltonianParams(validate_potential(g), cfg.beta, cfg.a, n)
    sf = params.scaling
    seed = derive_stream_seed(cfg.master_seed, 0)
    X, Y, smeta = draw_samples(params, cfg.replicas, seed, cfg)
    res = minimize(params)
    times = sorted(cfg.clt_times)
    if any(not 0 < t < 1 for t in times):
        raise ConfigError("clt_times must lie in (0, 1)")
    S = clt_statistics(X, Y, res.x, res.y, times + [1.0])
    R = S.shape[0]
    rows = []
    for j, t in enumerate(times):
        col = S[:, j]
        pred = float(np.log(1.0 / sf.theta(t)) / cfg.beta)
        mean, var = float(col.mean()), float(col.var(ddof=1))
        z = float(mean / np.sqrt(var / R))
        ks = float(stats.kstest(col / np.sqrt(var), "norm").statistic)
        rows.append({"t": t, "mean": mean, "var": var, "predicted_var": pred, "ks_normal": ks})
        rep.check(f"mean S({t})", z, cfg.clt_mean_z, abs(z) <= cfg.clt_mean_z, statistic="z-score")
        rep.check(f"Var S({t})", var / pred, [1 - cfg.clt_var_tol, 1 + cfg.clt_var_tol],
                  abs(var / pred - 1) <= cfg.clt_var_tol, empirical=var, predicted=pred)
        rep.check(f"KS normal S({t})", ks, cfg.clt_ks, ks <= cfg.clt_ks)
    for j in range(len(times)):
        for l in range(j + 1, len(times)):
            cov = float(np.cov(S[:, j], S[:, l])[0, 1])
            pred = float(np.log(1.0 / sf.theta(times[l])) / cfg.beta)
            rep.check(f"Cov S({times[j]}),S({times[l]})", cov / pred,
                      [1 - cfg.clt_cov_tol, 1 + cfg.clt_cov_tol], abs(cov / pred - 1) <= cfg.clt_cov_tol)
            corr = float(np.corrcoef(S[:, j] - S[:, l], S[:, l])[0, 1])
            rep.check(f"Corr increment S({times[j]})-S({times[l]}) vs S({times[l]})", corr,
                      cfg.clt_incr_corr, abs(corr) <= cfg.clt_incr_corr)
    for t in times:
        k0 = int(np.floor(n * t))
        mx = float(X[:, k0 - 1].mean())
        rel = abs(mx / float(sf.phi(t)) - 1)
        rep.check(f"mean X at t={t}", rel, cfg.clt_x_tol, rel <= cfg.clt_x_tol, statistic="relative error to phi(t)")
    v1 = float(S[:, -1].var(ddof=1))
    rep.check("Var S(1)", v1, 0.01, v1 <= 0.01)
    rep.data = {"n": n, "replicas": R, "rows": rows, "sampler": smeta["method"],
                "convexity_estimate": smeta["convexity_estimate"], "beta_one": smeta["beta_one"]}
    rep.provenance = {"config_hash": cfg.digest(), "seed": seed}
    return rep


_RUNNERS = {
    "universality": run_universality,
    "mean-check": run_mean_check,
    "var-check": run_variance_check,
    "clt-check": run_clt_check,
}


def run_experiment(cfg: ExperimentConfig) -> Report:
    return _RUNNERS[cfg.experiment](cfg)
