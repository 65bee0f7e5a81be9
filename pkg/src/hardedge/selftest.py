"""Deterministic oracles run by ``hardedge selftest``."""
from __future__ import annotations

import numpy as np

from .hamiltonian import (
    HamiltonianParams,
    alternating_eigenvalue,
    circulant_coarse_hessian,
    grad_hamiltonian,
    grad_via_paths,
    lattice_coefficients,
    lattice_enumerate,
    minimize,
)
from .harness import ks_statistic
from .sampler import sample_laguerre_batch
from .potential import LINEAR, ScalingFunctions, validate_potential
from .spectra import InverseKernelState, dense_inverse_kernel, kernel_apply, smallest_eigs, sturm_eigs

QUARTIC = [0.5, 0.125]


def _closed_form_phi():
    sf = ScalingFunctions(LINEAR)
    t = np.linspace(0, 1, 101)
    err = max(np.max(np.abs(sf.phi(t) - np.sqrt(t))), np.max(np.abs(sf.theta(t) - t)), abs(sf.kappa - 0.25))
    return err <= 1e-10, f"max error {err:.1e}"


def _lattice():
    ok = all(lattice_enumerate(m) == lattice_coefficients(m) for m in range(1, 6))
    return ok, "m = 1..5"


def _paths_gradient():
    rng = np.random.default_rng(7)
    params = HamiltonianParams(validate_potential(QUARTIC), 2.0, 0.0, 12)
    worst = 0.0
    for _ in range(3):
        x, y = rng.uniform(0.5, 1.5, 12), rng.uniform(0.5, 1.5, 11)
        g = grad_hamiltonian(params, x, y)
        for i in range(4, 9):
            log_part = -params.log_coefficients[0][i - 1] / x[i - 1]
            worst = max(worst, abs(grad_via_paths(params, x, y, i) - (g[2 * (i - 1)] - log_part)))
    return worst <= 1e-12, f"max error {worst:.1e}"


def _laguerre_minimizer():
    n, beta, a = 200, 2.0, 0.5
    res = minimize(HamiltonianParams(LINEAR, beta, a, n))
    k = np.arange(1, n + 1)
    err = max(np.max(np.abs(res.x - np.sqrt((k + a - 1 / beta) / n))),
              np.max(np.abs(res.y - np.sqrt((k[:-1] - 1 / beta) / n))))
    return err <= 1e-10, f"max error {err:.1e}"


def _circulant():
    worst = 0.0
    for g in ([0.5], QUARTIC):
        sf = ScalingFunctions(validate_potential(g))
        for t in (0.3, 0.5, 0.9):
            H = circulant_coarse_hessian(sf.potential, t, at=sf.phi(t))
            v = (-1.0) ** np.arange(H.shape[0])
            worst = max(worst, np.max(np.abs(H @ v - alternating_eigenvalue(sf, t) * v)))
    return worst <= 1e-9, f"max residual {worst:.1e}"


def _kernel_apply():
    rng = np.random.default_rng(3)
    x, y = rng.uniform(0.5, 2, 150), rng.uniform(0.5, 2, 149)
    st = InverseKernelState.from_arrays(x, y)
    K = dense_inverse_kernel(st)
    v = rng.standard_normal(150)
    err = max(np.max(np.abs(kernel_apply(st, v) - K @ v)) / np.max(np.abs(K @ v)),
              np.max(np.abs(kernel_apply(st, v, True) - K.T @ v)) / np.max(np.abs(K.T @ v)))
    return err <= 1e-10, f"relative error {err:.1e}"


def _eigensolvers():
    X, Y = sample_laguerre_batch(HamiltonianParams(LINEAR, 2.0, 0.0, 500), np.random.default_rng(5), 1)
    x, y = X[0], Y[0]
    a = smallest_eigs((x, y), 3).values
    b = sturm_eigs((x, y), 3).values
    err = np.max(np.abs(a - b) / b)
    return err <= 1e-6, f"relative difference {err:.1e}"


def _ks():
    v = ks_statistic([1, 2, 3], [1.5, 2.5, 3.5])
    return abs(v - 1 / 3) < 1e-15, f"KS = {v:.6f}"


CHECKS = [
    ("closed-form scaling functions", _closed_form_phi),
    ("lattice path coefficients", _lattice),
    ("gradient by path summation", _paths_gradient),
    ("Laguerre minimizer", _laguerre_minimizer),
    ("circulant eigenvalue identity", _circulant),
    ("matrix-free inverse kernel", _kernel_apply),
    ("Lanczos versus Sturm bisection", _eigensolvers),
    ("KS statistic", _ks),
]


def run_all():
    """List of ``(name, passed, detail)``."""
    out = []
    for name, fn in CHECKS:
        ok, detail = fn()
        out.append((name, bool(ok), detail))
    return out
