"""Smallest eigenvalues of the bidiagonal model and Monte-Carlo SBO spectra.

Model side: the inverse of the bidiagonal matrix has the explicit
upper-triangular form

    K[i, j] = (1/X_j) prod_{k=i}^{j-1} Y_k / X_k = exp(p_j - p_i - log X_j),  i <= j,

with ``p_j = sum_{k<j} (log Y_k - log X_k)``, and ``K^T K = (B^T B)^{-1}``.
The smallest eigenvalues of ``B B^T`` are the reciprocals of the largest
eigenvalues of ``K^T K``, found by Lanczos on the matrix-free operator.

SBO side: the inverse Stochastic Bessel Operator has kernel

    k(s, t) = t^{-1/2} (s/t)^{a/2} exp(W(s) - W(t)),   s < t,

where ``W(s) - W(t) ~ N(0, log(t/s)/beta)`` with independent increments.
For a general potential the kernel is taken in the time-changed form
``(phi(s) phi(t))^{-1/2} (theta(s)/theta(t))^{a/2+1/4} exp(W(theta s) - W(theta t))``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .errors import (
    ConfigError,
    DoubleRescale,
    GridTooCoarse,
    NoConvergence,
    NonFinite,
    TooLarge,
)
from .potential import ScalingFunctions

__all__ = [
    "InverseKernelState",
    "SBOGrid",
    "SpectrumResult",
    "kernel_apply",
    "dense_inverse_kernel",
    "smallest_eigs",
    "sturm_eigs",
    "make_sbo_grid",
    "simulate_noise",
    "sbo_matrix",
    "sbo_spectrum",
    "coupled_sbo_pair",
    "rescale_hard_edge",
    "hard_edge_factor",
]

_LOG_WINDOW = 300.0
_MAX_K = 20


def _start_vector(n):
    # fixed generic start so results do not depend on ARPACK's internal RNG state
    return np.random.default_rng(n).standard_normal(n)


# -- model side ---------------------------------------------------------------

@dataclass(frozen=True)
class InverseKernelState:
    """Log-domain description of ``K = B^{-T}``.

    ``blocks`` lists ``(start, stop)`` ranges separated by zero ``Y`` entries,
    across which ``K`` vanishes; ``log_prefix`` restarts at 0 in every block.
    """

    n: int
    log_prefix: np.ndarray
    log_diag: np.ndarray
    blocks: tuple

    @classmethod
    def from_arrays(cls, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        n = x.shape[0]
        if y.shape != (n - 1,):
            raise ConfigError("y must have length n - 1")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise NonFinite("non-finite sample entries")
        if np.any(x <= 0) or np.any(y < 0):
            raise ConfigError("need x > 0 and y >= 0")
        cuts = np.flatnonzero(y == 0) + 1
        bounds = np.concatenate([[0], cuts, [n]])
        blocks = tuple((int(s), int(e)) for s, e in zip(bounds[:-1], bounds[1:]))
        lx = np.log(x)
        p = np.zeros(n)
        with np.errstate(divide="ignore"):
            step = np.log(y) - lx[:-1]
        for s, e in blocks:
            p[s + 1:e] = np.cumsum(step[s:e - 1])
        return cls(n, p, lx, blocks)

    @classmethod
    def from_sample(cls, sample):
        return cls.from_arrays(sample.x, sample.y)


def _signed_logadd(s1, l1, s2, l2):
    m = np.maximum(l1, l2)
    m = np.where(np.isfinite(m), m, 0.0)
    val = s1 * np.exp(l1 - m) + s2 * np.exp(l2 - m)
    with np.errstate(divide="ignore"):
        return np.sign(val), m + np.log(np.abs(val))


def _scaled_cumsum(a, v, b):
    """``out[i] = exp(b[i]) * sum_{j <= i} exp(a[j]) v[j]`` without overflow.

    The running sum is renormalized whenever ``a`` drifts more than
    ``_LOG_WINDOW`` from the current segment reference; the carry between
    segments is kept as (sign, log-magnitude).
    """
    n = a.shape[0]
    out = np.zeros(v.shape)
    vmax = np.max(np.abs(v)) if v.size else 0.0
    if vmax == 0:
        return out
    w = v / vmax
    extra = (1,) * (v.ndim - 1)
    cs = np.zeros(v.shape[1:])
    cl = np.full(v.shape[1:], -np.inf)
    s = 0
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        while s < n:
            drift = np.abs(a[s:] - a[s]) > _LOG_WINDOW
            e = s + int(np.argmax(drift)) if drift.any() else n
            ref = a[s]
            part = np.cumsum(np.exp(a[s:e] - ref).reshape((-1,) + extra) * w[s:e], axis=0)
            bb = b[s:e].reshape((-1,) + extra)
            t1 = np.sign(part) * np.exp(bb + ref + np.log(np.abs(part)))
            t2 = cs * np.exp(bb + cl)
            out[s:e] = np.nan_to_num(t1) + np.nan_to_num(t2)
            ps, pl = np.sign(part[-1]), ref + np.log(np.abs(part[-1]))
            cs, cl = _signed_logadd(cs, cl, ps, pl)
            s = e
    return out * vmax


def kernel_apply(state: InverseKernelState, v, transpose: bool = False):
    """``K v`` (or ``K^T v``) in O(n); ``v`` may carry extra trailing columns."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != state.n:
        raise ConfigError(f"vector length {v.shape[0]} != n = {state.n}")
    if not np.all(np.isfinite(v)):
        raise NonFinite("non-finite input vector")
    out = np.zeros(v.shape)
    p, lx = state.log_prefix, state.log_diag
    for s, e in state.blocks:
        pb, lb = p[s:e], lx[s:e]
        if transpose:
            out[s:e] = _scaled_cumsum(-pb, v[s:e], pb - lb)
        else:
            out[s:e] = _scaled_cumsum((pb - lb)[::-1], v[s:e][::-1], -pb[::-1])[::-1]
    if not np.all(np.isfinite(out)):
        raise NonFinite("kernel application overflowed")
    return out


def dense_inverse_kernel(state: InverseKernelState):
    """Dense ``K`` (test oracle; overflows for extreme samples)."""
    n = state.n
    p, lx = state.log_prefix, state.log_diag
    K = np.zeros((n, n))
    with np.errstate(over="ignore"):
        for s, e in state.blocks:
            i, j = np.triu_indices(e - s)
            K[s + i, s + j] = np.exp(p[s + j] - p[s + i] - lx[s + j])
    return K


@dataclass(frozen=True)
class SpectrumResult:
    """Ascending eigenvalues with the scale factor already applied."""

    values: np.ndarray
    rescale_factor: float = 1.0
    rescaled: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(np.diff(v) < 0):
            raise ValueError("eigenvalues must be ascending")
        object.__setattr__(self, "values", v)


def _as_state(sample):
    if isinstance(sample, InverseKernelState):
        return sample
    if isinstance(sample, tuple):
        return InverseKernelState.from_arrays(*sample)
    return InverseKernelState.from_sample(sample)


def _check_k(k, n):
    if not 1 <= k <= _MAX_K:
        raise ConfigError(f"k = {k} outside [1, {_MAX_K}]")
    if k > n:
        raise ConfigError(f"k = {k} exceeds n = {n}")


def smallest_eigs(sample, k: int = 1, max_iter: int = 500, tol: float = 1e-8) -> SpectrumResult:
    """``k`` smallest eigenvalues of ``B B^T`` via Lanczos on ``K^T K``.

    ``sample`` is a :class:`~hardedge.sampler.BidiagonalSample`, an
    ``(x, y)`` tuple or an :class:`InverseKernelState`.  Each Ritz pair must
    satisfy ``|K^T K u - mu u| <= tol * mu``.
    """
    state = _as_state(sample)
    n = state.n
    _check_k(k, n)
    ncv = min(n, max(4 * k, 20))
    if n <= ncv + 1:
        K = dense_inverse_kernel(state)
        s = linalg.svdvals(K)[:k]
        mu = s**2
        res = np.zeros(k)
        iters = 0
    else:
        op = LinearOperator(
            (n, n),
            matvec=lambda v: kernel_apply(state, kernel_apply(state, v), transpose=True),
            dtype=float,
        )
        try:
            mu, U = eigsh(op, k=k, which="LA", ncv=ncv, maxiter=max_iter, tol=0, v0=_start_vector(n))
        except ArpackNoConvergence as exc:
            raise NoConvergence(f"Lanczos did not converge in {max_iter} restarts",
                                residuals=getattr(exc, "eigenvalues", None)) from exc
        order = np.argsort(mu)[::-1]
        mu, U = mu[order], U[:, order]
        AU = kernel_apply(state, kernel_apply(state, U), transpose=True)
        res = np.linalg.norm(AU - U * mu, axis=0)
        iters = max_iter
        bad = res > tol * np.abs(mu)
        if np.any(bad):
            raise NoConvergence("Ritz residuals above tolerance", residuals=res)
    lam = 1.0 / mu
    return SpectrumResult(lam, meta={"solver": "lanczos", "mu": mu, "residuals": res,
                                     "max_restarts": iters, "n": n})


def sturm_eigs(sample, k: int = 1) -> SpectrumResult:
    """``k`` smallest eigenvalues of ``B B^T`` by Sturm-count bisection on ``B^T B``."""
    if isinstance(sample, tuple):
        x, y = (np.asarray(v, dtype=float) for v in sample)
    else:
        x, y = np.asarray(sample.x, dtype=float), np.asarray(sample.y, dtype=float)
    n = x.shape[0]
    if n > 10_000:
        raise TooLarge("sturm_eigs is limited to n <= 10^4")
    _check_k(k, n)
    yy = np.append(y, 0.0)
    d = x * x + yy * yy
    e = x[1:] * y
    lam = linalg.eigh_tridiagonal(d, e, eigvals_only=True, select="i",
                                  select_range=(0, k - 1), tol=2 * np.finfo(float).tiny)
    norm = np.max(np.abs(d)) + 2 * (np.max(np.abs(e)) if e.size else 0.0)
    if lam[0] / norm < 1e-13:
        warnings.warn("smallest eigenvalue is near the relative accuracy limit of B^T B", RuntimeWarning)
    return SpectrumResult(np.sort(lam), meta={"solver": "sturm", "n": n})


def hard_edge_factor(kappa: float, n: int, convention: str = "corrected") -> float:
    """Scale factor ``c n^2`` mapping model eigenvalues to hard-edge units.

    ``"corrected"`` uses ``c = 1/(4 kappa)``, which follows from the
    change-of-variables identity with ``theta = kappa I^2``; ``"literal"``
    uses ``c = 4 kappa^2``.  For ``V(x) = x/2`` the corrected factor is ``n^2``.
    """
    if not kappa > 0 or n < 1:
        raise ConfigError("need kappa > 0 and n >= 1")
    if convention == "corrected":
        return n * n / (4.0 * kappa)
    if convention == "literal":
        return 4.0 * kappa**2 * n * n
    raise ConfigError(f"unknown convention {convention!r}")


def rescale_hard_edge(result: SpectrumResult, kappa: float, n: int,
                      convention: str = "corrected") -> SpectrumResult:
    """Multiply raw model eigenvalues by :func:`hard_edge_factor`."""
    if result.rescaled:
        raise DoubleRescale("spectrum has already been rescaled")
    f = hard_edge_factor(kappa, n, convention)
    return replace(result, values=result.values * f, rescale_factor=f, rescaled=True,
                   meta={**result.meta, "convention": convention})


# -- SBO side -----------------------------------------------------------------

@dataclass(frozen=True)
class SBOGrid:
    """Midpoint discretization of ``[eps, 1]``.

    ``edges`` are the cell boundaries, ``nodes`` the cell midpoints and
    ``weights`` the cell widths (summing to ``1 - eps``).
    """

    edges: np.ndarray
    beta: float
    a: float
    mode: str = "laguerre_native"

    def __post_init__(self):
        if self.mode not in ("laguerre_native", "general"):
            raise ConfigError(f"unknown SBO mode {self.mode!r}")
        if not self.beta > 0:
            raise ConfigError("beta must be positive")
        if not self.a > -1:
            raise ConfigError("a must be > -1")
        if np.any(np.diff(self.edges) <= 0) or self.edges[0] <= 0 or self.edges[-1] != 1.0:
            raise ConfigError("grid edges must increase from eps > 0 to 1")

    @property
    def M(self) -> int:
        return self.edges.shape[0] - 1

    @property
    def eps(self) -> float:
        return float(self.edges[0])

    @property
    def nodes(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def weights(self):
        return np.diff(self.edges)


def make_sbo_grid(M: int, beta: float, a: float, mode: str = "laguerre_native",
                  eps: float = 1e-6, fine_fraction: float = 0.25, split: float = 0.01) -> SBOGrid:
    """Geometric cells on ``[eps, split]`` and uniform cells on ``[split, 1]``."""
    if M < 8:
        raise ConfigError("need M >= 8")
    if not 0 < eps < split < 1:
        raise ConfigError("need 0 < eps < split < 1")
    m1 = max(1, int(round(fine_fraction * M)))
    m2 = M - m1
    low = np.geomspace(eps, split, m1 + 1)
    high = np.linspace(split, 1.0, m2 + 1)
    return SBOGrid(np.concatenate([low, high[1:]]), float(beta), float(a), mode)


def simulate_noise(times, beta: float, rng):
    """Values ``W(t) = int_t^1 db_u / sqrt(beta u)`` at the given times in ``(0, 1]``."""
    times = np.asarray(times, dtype=float)
    uniq, inv = np.unique(times, return_inverse=True)
    if uniq[0] <= 0 or uniq[-1] > 1:
        raise ConfigError("noise times must lie in (0, 1]")
    upper = np.append(uniq[1:], 1.0)
    var = np.log(upper / uniq) / beta
    inc = rng.standard_normal(uniq.shape[0]) * np.sqrt(var)
    W = np.cumsum(inc[::-1])[::-1]
    return W[inv]


def _kernel_logs(grid: SBOGrid, sf: ScalingFunctions | None, W):
    """Row factor ``A`` and column factor ``C`` with ``log k(s_i, s_j) = A_i + C_j``."""
    s = grid.nodes
    ls = np.log(s)
    if grid.mode == "laguerre_native":
        A = 0.5 * grid.a * ls + W
        C = -(0.5 + 0.5 * grid.a) * ls - W
    else:
        th = np.log(np.asarray(sf.theta(s), dtype=float))
        lp = np.log(np.asarray(sf.phi(s), dtype=float))
        e = 0.5 * grid.a + 0.25
        A = -0.5 * lp + e * th + W
        C = -0.5 * lp - e * th - W
    return A, C


def _noise_times(grid: SBOGrid, sf):
    if grid.mode == "laguerre_native":
        return grid.nodes
    if sf is None:
        raise ConfigError("general mode needs scaling functions")
    return np.asarray(sf.theta(grid.nodes), dtype=float)


def sbo_matrix(grid: SBOGrid, sf: ScalingFunctions | None, W):
    """Discretized operator ``M_ij = k(s_i, s_j) sqrt(w_i w_j)``, upper triangular.

    The diagonal carries half the kernel value: only the upper half of each
    diagonal cell lies in ``{s < t}``.
    """
    A, C = _kernel_logs(grid, sf, np.asarray(W, dtype=float))
    lw = 0.5 * np.log(grid.weights)
    M = np.exp(np.triu((A + lw)[:, None] + (C + lw)[None, :]))
    M = np.triu(M)
    M[np.diag_indices_from(M)] *= 0.5
    return M


def _top_singular(M, k):
    if M.shape[0] <= 4 * k + 2:
        return linalg.svdvals(M)[:k]
    op = LinearOperator(M.shape, matvec=lambda v: M.T @ (M @ v), dtype=float)
    mu = eigsh(op, k=k, which="LA", ncv=min(M.shape[0], max(4 * k, 20)), tol=0,
               v0=_start_vector(M.shape[0]), return_eigenvectors=False)
    return np.sqrt(np.sort(mu)[::-1])


def sbo_spectrum(grid: SBOGrid, sf: ScalingFunctions | None, rng, k: int = 1,
                 noise: bool = True, W=None, self_check: bool = False) -> SpectrumResult:
    """One Monte-Carlo draw of the ``k`` smallest SBO eigenvalues ``Lambda_i``.

    ``Lambda_i = 1 / sigma_i^2`` with ``sigma_i`` the top singular values of
    the discretized inverse kernel.  ``W`` overrides the simulated noise at
    the kernel's time arguments; ``noise=False`` sets it to zero.  With
    ``self_check`` the draw is repeated on a grid of ``2M`` cells sharing the
    same Brownian path, and :class:`GridTooCoarse` is raised if ``Lambda_1``
    moves by more than 1%.
    """
    if not 1 <= k <= _MAX_K:
        raise ConfigError(f"k = {k} outside [1, {_MAX_K}]")
    times = _noise_times(grid, sf)
    fine = None
    if W is None:
        if not noise:
            W = np.zeros(grid.M)
        elif self_check:
            fine = make_sbo_grid(2 * grid.M, grid.beta, grid.a, grid.mode, eps=grid.eps)
            ftimes = _noise_times(fine, sf)
            Wall = simulate_noise(np.concatenate([times, ftimes]), grid.beta, rng)
            W, Wf = Wall[: grid.M], Wall[grid.M:]
        else:
            W = simulate_noise(times, grid.beta, rng)
    sig = _top_singular(sbo_matrix(grid, sf, W), k)
    lam = np.sort(1.0 / sig**2)
    meta = {"solver": "sbo", "M": grid.M, "mode": grid.mode}
    if self_check:
        if fine is None:
            fine = make_sbo_grid(2 * grid.M, grid.beta, grid.a, grid.mode, eps=grid.eps)
            Wf = np.zeros(fine.M) if not noise else None
            if Wf is None:
                raise ConfigError("self_check with explicit W needs noise=False")
        sig2 = _top_singular(sbo_matrix(fine, sf, Wf), 1)
        lam2 = 1.0 / sig2[0] ** 2
        rel = abs(lam2 - lam[0]) / lam[0]
        meta["self_check_rel_change"] = rel
        if rel > 0.01:
            raise GridTooCoarse(f"Lambda_1 changed by {rel:.2%} under grid doubling")
    return SpectrumResult(lam, meta=meta)


def coupled_sbo_pair(M: int, sf: ScalingFunctions, beta: float, a: float, rng, k: int = 3):
    """Native and general-mode SBO spectra driven by one Brownian path.

    Returns ``(native, general)`` :class:`SpectrumResult` objects.  The
    general grid is the pullback of the native grid under ``theta``, so both
    kernels read the noise at the same times up to midpoint placement; the
    noise is simulated on the union of both sets of time arguments.
    """
    gn = make_sbo_grid(M, beta, a, "laguerre_native")
    edges = sf.theta_inverse(gn.edges)
    edges[-1] = 1.0
    gg = SBOGrid(edges, float(beta), float(a), "general")
    tn = _noise_times(gn, None)
    tg = _noise_times(gg, sf)
    Wall = simulate_noise(np.concatenate([tn, tg]), beta, rng)
    native = sbo_spectrum(gn, None, rng, k, W=Wall[:M])
    general = sbo_spectrum(gg, sf, rng, k, W=Wall[M:])
    return native, general
