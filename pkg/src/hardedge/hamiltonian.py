"""The Gibbs Hamiltonian of the bidiagonal matrix model.

For positive ``x[1..n]``, ``y[1..n-1]`` and the lower bidiagonal ``B(x, y)``,

    H(x, y) = tr V(B B^T) - sum_k (k/n + a/n - 1/(n beta)) log x_k
                          - sum_k (k/n - 1/(n beta)) log y_k,

and the model density is proportional to ``exp(-n beta H)``.  ``tr V`` is
evaluated through the symmetric tridiagonal ``T = B^T B`` (diagonal
``x_k^2 + y_k^2``, off-diagonal ``x_{k+1} y_k``), which has the same spectrum
as ``B B^T``; the sign of the off-diagonal never matters for traces.

Vectors are interleaved as ``(x_1, y_1, x_2, y_2, ..., x_n)`` so that the
Hessian is banded.  Every evaluation routine broadcasts over leading batch
axes, which the sampler uses to run many chains at once.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import comb

import numpy as np
from scipy import linalg

from . import _banded as bd
from .errors import (
    ConfigError,
    IndexOutOfBulk,
    LineSearchStall,
    NonConvergence,
    NonPositiveEntry,
    TooLarge,
)
from .potential import ScalingFunctions, ValidatedPotential, validate_potential

__all__ = [
    "HamiltonianParams",
    "BandedHessian",
    "MinimizerResult",
    "ConditionalSpec",
    "pack",
    "unpack",
    "trace_V",
    "hamiltonian",
    "grad_hamiltonian",
    "value_and_grad",
    "hvp_hamiltonian",
    "hessian_hamiltonian",
    "minimize",
    "convexity_estimate",
    "conditional_minimize",
    "lattice_coefficients",
    "lattice_enumerate",
    "count_flat_start_paths",
    "grad_via_paths",
    "coarse_hamiltonian",
    "circulant_coarse_hessian",
    "alternating_eigenvalue",
]


@dataclass(frozen=True)
class HamiltonianParams:
    potential: ValidatedPotential
    beta: float
    a: float
    n: int

    def __post_init__(self):
        if not isinstance(self.potential, ValidatedPotential):
            object.__setattr__(self, "potential", validate_potential(self.potential))
        if not self.beta >= 1:
            raise ConfigError(f"beta = {self.beta} must be >= 1")
        if not self.a > -1:
            raise ConfigError(f"a = {self.a} must be > -1")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError(f"n = {self.n} must be a positive integer")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "a", float(self.a))

    @property
    def d(self) -> int:
        return self.potential.degree

    @property
    def n_vars(self) -> int:
        return 2 * self.n - 1

    @cached_property
    def log_coefficients(self):
        """Weights of ``log x_k`` and ``log y_k`` in H."""
        k = np.arange(1, self.n + 1, dtype=float)
        cx = (k + self.a - 1.0 / self.beta) / self.n
        cy = (k[:-1] - 1.0 / self.beta) / self.n
        return cx, cy

    @cached_property
    def scaling(self) -> ScalingFunctions:
        return ScalingFunctions(self.potential)

    def with_n(self, n: int) -> "HamiltonianParams":
        return HamiltonianParams(self.potential, self.beta, self.a, n)


def pack(x, y):
    """Interleave ``x[..., n]`` and ``y[..., n-1]`` into ``z[..., 2n-1]``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[-1]
    z = np.empty(np.broadcast_shapes(x.shape[:-1], y.shape[:-1]) + (2 * n - 1,))
    z[..., 0::2] = x
    z[..., 1::2] = y
    return z


def unpack(z):
    z = np.asarray(z, dtype=float)
    return z[..., 0::2], z[..., 1::2]


def _check_positive(x, y):
    if np.any(~(x > 0)) or np.any(~(y > 0)):
        raise NonPositiveEntry("x and y must be strictly positive")


def _tridiagonal(x, y):
    yy = np.zeros_like(x)
    yy[..., :-1] = y
    diag = x * x + yy * yy
    off = x[..., 1:] * y
    return diag, off


def _powers(T, upto):
    P = [bd.identity_like(T), T]
    for _ in range(2, upto + 1):
        P.append(bd.mul(P[-1], T))
    return P[: upto + 1]


def _derivative_band(g, P):
    """Band array of ``V'(T) = sum_m m g_m T^(m-1)``."""
    W = None
    for m, gm in enumerate(g, start=1):
        if gm == 0:
            continue
        term = P[m - 1] * (m * gm)
        W = term if W is None else bd.add(W, term)
    return W


def _trace_from_powers(g, P):
    # tr T^m = <T^floor(m/2), T^ceil(m/2)>_F for symmetric T
    total = 0.0
    for m, gm in enumerate(g, start=1):
        if gm:
            total = total + gm * bd.frobenius(P[m // 2], P[m - m // 2])
    return total


def _power_count(d):
    return max(d - 1, (d + 1) // 2, 1)


def trace_V(params: HamiltonianParams, x, y):
    """``tr V(B B^T)`` via banded powers of the tridiagonal ``T``; O(n d^2)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_positive(x, y)
    g = params.potential.g
    T = bd.from_tridiagonal(*_tridiagonal(x, y))
    return _trace_from_powers(g, _powers(T, _power_count(len(g))))


def _log_terms(params, x, y):
    cx, cy = params.log_coefficients
    return (cx * np.log(x)).sum(axis=-1) + (cy * np.log(y)).sum(axis=-1)


def hamiltonian(params: HamiltonianParams, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_positive(x, y)
    return trace_V(params, x, y) - _log_terms(params, x, y)


def _grad_parts(params, x, y):
    g = params.potential.g
    T = bd.from_tridiagonal(*_tridiagonal(x, y))
    P = _powers(T, _power_count(len(g)))
    W = _derivative_band(g, P)
    Wd = bd.diagonal(W, 0)
    Wo = bd.diagonal(W, 1)
    gx = 2.0 * x * Wd
    gx[..., 1:] += 2.0 * Wo * y
    gy = 2.0 * y * Wd[..., :-1] + 2.0 * Wo * x[..., 1:]
    cx, cy = params.log_coefficients
    gx = gx - cx / x
    gy = gy - cy / y
    return gx, gy, P, W


def value_and_grad(params: HamiltonianParams, x, y):
    """``(H, grad H)`` sharing one set of banded powers."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_positive(x, y)
    gx, gy, P, _ = _grad_parts(params, x, y)
    val = _trace_from_powers(params.potential.g, P) - _log_terms(params, x, y)
    return val, pack(gx, gy)


def grad_hamiltonian(params: HamiltonianParams, x, y):
    """Exact gradient of H in interleaved ordering, shape ``(..., 2n-1)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_positive(x, y)
    gx, gy, _, _ = _grad_parts(params, x, y)
    return pack(gx, gy)


def _hvp_parts(params, x, y, vx, vy, P, W):
    g = params.potential.g
    Wd = bd.diagonal(W, 0)
    Wo = bd.diagonal(W, 1)
    yy = np.zeros_like(x)
    yy[..., :-1] = y
    vyy = np.zeros(np.broadcast_shapes(vx.shape, x.shape))
    vyy[..., :-1] = vy
    dT = bd.from_tridiagonal(2.0 * x * vx + 2.0 * yy * vyy, vx[..., 1:] * y + x[..., 1:] * vy)
    dW = None
    for m, gm in enumerate(g, start=1):
        if m < 2 or gm == 0:
            continue
        for j in range(m - 1):
            term = bd.mul(bd.mul(P[j], dT), P[m - 2 - j]) * (m * gm)
            dW = term if dW is None else bd.add(dW, term)
    if dW is None:
        dWd = np.zeros_like(vyy)
        dWo = np.zeros_like(vyy[..., :-1])
    else:
        dWd = bd.diagonal(dW, 0)
        dWo = bd.diagonal(dW, 1)
    hx = 2.0 * vx * Wd + 2.0 * x * dWd
    hx[..., 1:] += 2.0 * dWo * y + 2.0 * Wo * vy
    hy = 2.0 * vy * Wd[..., :-1] + 2.0 * y * dWd[..., :-1] + 2.0 * dWo * x[..., 1:] + 2.0 * Wo * vx[..., 1:]
    cx, cy = params.log_coefficients
    hx = hx + cx / x**2 * vx
    hy = hy + cy / y**2 * vy
    return hx, hy


def hvp_hamiltonian(params: HamiltonianParams, x, y, v):
    """Exact Hessian-vector product ``(nabla^2 H) v`` (forward-mode by hand)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_positive(x, y)
    vx, vy = unpack(v)
    g = params.potential.g
    T = bd.from_tridiagonal(*_tridiagonal(x, y))
    P = _powers(T, _power_count(len(g)))
    W = _derivative_band(g, P)
    return pack(*_hvp_parts(params, x, y, vx, vy, P, W))


@dataclass
class BandedHessian:
    """Symmetric banded matrix in LAPACK upper storage.

    ``ab[w + i - j, j] = H[i, j]`` for ``max(0, j - w) <= i <= j``.
    """

    ab: np.ndarray
    bandwidth: int

    @property
    def n_vars(self) -> int:
        return self.ab.shape[1]

    def to_dense(self):
        w, N = self.bandwidth, self.n_vars
        out = np.zeros((N, N))
        for r in range(w + 1):
            k = w - r
            j = np.arange(k, N)
            out[j - k, j] = self.ab[r, k:]
            out[j, j - k] = self.ab[r, k:]
        return out

    def matvec(self, v):
        w, N = self.bandwidth, self.n_vars
        out = self.ab[w] * v
        for r in range(w):
            k = w - r
            out[:-k] += self.ab[r, k:] * v[k:]
            out[k:] += self.ab[r, k:] * v[:-k]
        return out

    def cholesky(self):
        """Banded Cholesky factor; raises ``LinAlgError`` if not positive definite."""
        return linalg.cholesky_banded(self.ab, lower=False)

    def solve(self, rhs):
        return linalg.cho_solve_banded((self.cholesky(), False), rhs)

    def min_eigenvalue(self) -> float:
        return float(linalg.eigvals_banded(self.ab, lower=False, select="i", select_range=(0, 0))[0])

    def submatrix(self, lo, hi):
        """Principal block on rows/columns ``lo..hi-1``."""
        w = self.bandwidth
        ab = self.ab[:, lo:hi].copy()
        for r in range(w):
            k = w - r
            ab[r, :k] = 0.0
        return BandedHessian(ab, w)


def hessian_hamiltonian(params: HamiltonianParams, x, y) -> BandedHessian:
    """Analytic banded Hessian, recovered from exact Hessian-vector products.

    With half-bandwidth ``w = 2d`` in interleaved ordering, probing with the
    ``2w + 1`` comb vectors ``e_S``, ``S = {p : p = c mod (2w+1)}``, isolates
    each band entry exactly.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1:
        raise ValueError("hessian_hamiltonian expects a single point")
    _check_positive(x, y)
    N = 2 * params.n - 1
    w = 2 * params.d
    period = 2 * w + 1
    ncol = min(period, N)
    probes = np.zeros((ncol, N))
    pos = np.arange(N)
    probes[pos % period, pos] = 1.0
    g = params.potential.g
    T = bd.from_tridiagonal(*_tridiagonal(x, y))
    P = _powers(T, _power_count(len(g)))
    W = _derivative_band(g, P)
    vx, vy = unpack(probes)
    Hv = pack(*_hvp_parts(params, x, y, vx, vy, P, W))  # (ncol, N)
    ab = np.zeros((w + 1, N))
    for r in range(w + 1):
        k = w - r  # superdiagonal offset: H[j-k, j]
        j = np.arange(k, N)
        ab[r, k:] = Hv[j % period, j - k]
    return BandedHessian(ab, w)


@dataclass
class MinimizerResult:
    x: np.ndarray
    y: np.ndarray
    grad_norm: float
    iterations: int
    converged: bool = True

    @property
    def z(self):
        return pack(self.x, self.y)


def _check_minimizable(params):
    cx, cy = params.log_coefficients
    if cx.min() < 0 or (cy.size and cy.min() < 0):
        raise ConfigError(
            "log-term weight k + a - 1/beta is negative for k = 1; "
            "H is unbounded below and has no minimizer"
        )


def _newton(fun, grad, hess, z0, tol, max_iter):
    """Damped Newton with positivity guard and Armijo backtracking."""
    z = z0.copy()
    f = fun(z)
    gnorm = np.inf
    for it in range(max_iter + 1):
        g = grad(z)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol * max(1.0, float(np.linalg.norm(z))):
            return z, gnorm, it, True
        if it == max_iter:
            break
        H = hess(z)
        try:
            dz = -H.solve(g)
        except np.linalg.LinAlgError:
            dz = -g
        slope = float(g @ dz)
        if slope >= 0:
            dz, slope = -g, -float(g @ g)
        neg = dz < 0
        s = 1.0
        if neg.any():
            s = min(1.0, float(np.min(0.9 * z[neg] / -dz[neg])))
        slack = 1e-13 * (abs(f) + 1.0)
        while True:
            z_new = z + s * dz
            f_new = fun(z_new)
            if f_new <= f + 1e-4 * s * slope + slack:
                break
            s *= 0.5
            if s < 1e-20:
                raise LineSearchStall(f"line search stalled at |grad| = {gnorm:.3e}", best=z)
        z, f = z_new, f_new
    raise NonConvergence(f"Newton did not converge in {max_iter} iterations (|grad| = {gnorm:.3e})", best=z)


def minimize(params: HamiltonianParams, init=None, tol: float = 1e-10, max_iter: int = 200) -> MinimizerResult:
    """Global minimizer of H by damped Newton with banded solves.

    Stops once ``|grad| <= tol * max(1, |z|)``.  The default starting point is
    the fine minimizer.  A coordinate whose log weight is exactly zero (``y_1``
    at ``beta = 1``) has its infimum at 0; it is returned positive and of
    order ``tol``.
    """
    _check_minimizable(params)
    n = params.n
    if init is None:
        if n >= 2:
            init = params.scaling.fine_minimizer(params.beta, params.a, n)
        else:
            init = (np.array([float(params.scaling.phi(1.0))]), np.zeros(0))
    z0 = pack(*init)

    def fun(z):
        return float(hamiltonian(params, *unpack(z)))

    def grad(z):
        return grad_hamiltonian(params, *unpack(z))

    def hess(z):
        return hessian_hamiltonian(params, *unpack(z))

    z, gnorm, it, ok = _newton(fun, grad, hess, z0, tol, max_iter)
    x, y = unpack(z)
    return MinimizerResult(x.copy(), y.copy(), gnorm, it, ok)


def convexity_estimate(params: HamiltonianParams, result: MinimizerResult | None = None) -> float:
    """Smallest Hessian eigenvalue of H at its minimizer.

    An empirical stand-in for the uniform convexity constant of H.
    """
    if result is None:
        result = minimize(params)
    return hessian_hamiltonian(params, result.x, result.y).min_eigenvalue()


@dataclass(frozen=True)
class ConditionalSpec:
    """Interval ``I = [i0, i1]`` (1-based, inclusive) with frozen boundary values.

    ``x_frame`` / ``y_frame`` are full-length arrays; only their entries on the
    boundary ``dI`` (the ``d`` indices on each side of ``I``) are used as ``q``.
    """

    i0: int
    i1: int
    x_frame: np.ndarray
    y_frame: np.ndarray

    def boundary(self, d: int, n: int):
        left = list(range(max(1, self.i0 - d), self.i0))
        right = list(range(self.i1 + 1, min(n, self.i1 + d) + 1))
        return left, right


def conditional_minimize(params: HamiltonianParams, spec: ConditionalSpec, init=None,
                         tol: float = 1e-12, max_iter: int = 200) -> MinimizerResult:
    """Minimize H over the coordinates of ``I`` with ``dI`` frozen at ``q``.

    Returns full-length arrays: coordinates in ``I`` hold the conditional
    minimizer, all others the frame values.
    """
    _check_minimizable(params)
    n = params.n
    if not (1 <= spec.i0 <= spec.i1 <= n):
        raise ConfigError(f"bad interval [{spec.i0}, {spec.i1}] for n = {n}")
    xf = np.asarray(spec.x_frame, dtype=float).copy()
    yf = np.asarray(spec.y_frame, dtype=float).copy()
    if xf.shape != (n,) or yf.shape != (n - 1,):
        raise ConfigError("frames must have lengths n and n-1")
    left, right = spec.boundary(params.d, n)
    q = [xf[i - 1] for i in left + right] + [yf[i - 1] for i in left + right if i <= n - 1]
    if np.any(np.asarray(q) <= 0):
        raise NonPositiveEntry("boundary values must be positive")
    lo = 2 * (spec.i0 - 1)
    hi = min(2 * (spec.i1 - 1) + 2, 2 * n - 1)
    z_frame = pack(xf, yf)
    if init is not None:
        z_frame[lo:hi] = pack(*init)[lo:hi]

    def full(zi):
        z = z_frame.copy()
        z[lo:hi] = zi
        return z

    def fun(zi):
        return float(hamiltonian(params, *unpack(full(zi))))

    def grad(zi):
        return grad_hamiltonian(params, *unpack(full(zi)))[lo:hi]

    def hess(zi):
        return hessian_hamiltonian(params, *unpack(full(zi))).submatrix(lo, hi)

    zi, gnorm, it, ok = _newton(fun, grad, hess, z_frame[lo:hi].copy(), tol, max_iter)
    x, y = unpack(full(zi))
    return MinimizerResult(x.copy(), y.copy(), gnorm, it, ok)


# ---------------------------------------------------------------------------
# lattice paths

_MAX_CLOSED_FORM = 20
_MAX_ENUMERATE = 6


def lattice_coefficients(m: int):
    """Closed forms ``(A_m, B_m, C_m, D_m)`` as exact integers."""
    if not (1 <= m <= _MAX_CLOSED_FORM):
        raise TooLarge(f"m = {m} outside [1, {_MAX_CLOSED_FORM}]")
    A = Fraction(m * comb(2 * m, m))
    B = Fraction(2 * m * m - 2 * m + 1, 2 * m - 1) * A
    C = Fraction(2 * m * m - 2 * m, 2 * m - 1) * A
    D = -Fraction(m * m - m, 2 * m - 1) * A
    out = []
    for v in (A, B, C, D):
        if v.denominator != 1:  # pragma: no cover - the closed forms are integral
            raise ArithmeticError(f"non-integral coefficient {v}")
        out.append(int(v))
    return tuple(out)


# step codes: 0 = flat, 1 = down (odd steps) / up (even steps)
def _paths(m, starts=None):
    """Yield height sequences and step codes of closed walks of length ``2m``.

    Heights are relative to the differentiated index; every start height in
    ``[-m, m]`` is included so that the sum runs over the whole trace.
    """
    if starts is None:
        starts = range(-m, m + 1)
    for s in starts:
        for steps in itertools.product((0, 1), repeat=2 * m):
            h = s
            heights = [s]
            for j, st in enumerate(steps):
                if st:
                    h += -1 if j % 2 == 0 else 1
                heights.append(h)
            if h == s:
                yield heights, steps


def _flat_at_zero(heights, steps):
    return sum(1 for j, s in enumerate(steps) if s == 0 and heights[j] == 0)


def lattice_enumerate(m: int):
    """``(A_m, B_m, C_m, D_m)`` by brute-force summation over lattice paths.

    Sums over closed walks of every start height; ``r`` counts flat steps at
    height zero.  ``A`` sums ``r``, ``B`` sums
    ``r * (#flat - 1)``, ``C`` sums ``r * #(up or down)`` and ``D`` sums
    ``r`` times the lower height of every step.
    """
    if not (1 <= m <= _MAX_ENUMERATE):
        raise TooLarge(f"enumeration limited to m <= {_MAX_ENUMERATE}")
    A = B = C = D = 0
    for heights, steps in _paths(m):
        r = _flat_at_zero(heights, steps)
        if r == 0:
            continue
        flats = steps.count(0)
        A += r
        B += r * (flats - 1)
        C += r * (2 * m - flats)
        D += r * sum(min(heights[j], heights[j + 1]) for j in range(2 * m))
    return A, B, C, D


def count_flat_start_paths(m: int) -> int:
    """Number of closed walks from height zero whose first step is flat."""
    if not (1 <= m <= _MAX_ENUMERATE):
        raise TooLarge(f"enumeration limited to m <= {_MAX_ENUMERATE}")
    return sum(1 for _, steps in _paths(m, starts=(0,)) if steps[0] == 0)


def grad_via_paths(params: HamiltonianParams, x, y, i: int) -> float:
    """``d tr V(B B^T) / d x_i`` by direct lattice-path summation.

    Test oracle only; ``i`` is 1-based and must satisfy ``d < i < n - d``.
    """
    n, d = params.n, params.d
    if not (d < i < n - d):
        raise IndexOutOfBulk(f"index {i} not in the bulk ({d}, {n - d})")
    if d > _MAX_ENUMERATE:
        raise TooLarge("path oracle limited to degree <= 6")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    total = 0.0
    for m, gm in enumerate(params.potential.g, start=1):
        if gm == 0:
            continue
        acc = 0.0
        for heights, steps in _paths(m):
            r = _flat_at_zero(heights, steps)
            if r == 0:
                continue
            prod = 1.0
            for j, s in enumerate(steps):
                h = heights[j]
                if s == 0:
                    prod *= x[i + h - 1]
                elif j % 2 == 0:  # odd-timed down step: y_{i+h-1}
                    prod *= y[i + h - 2]
                else:  # even-timed up step: y_{i+h}
                    prod *= y[i + h - 1]
            acc += r * prod
        total += gm * acc / x[i - 1]
    return total


# ---------------------------------------------------------------------------
# coarse Hamiltonian and its circulant realization

def coarse_hamiltonian(potential: ValidatedPotential, t: float, x: float, y: float) -> float:
    """``H_t(x, y) = sum_m g_m sum_l C(m,l)^2 x^{2l} y^{2m-2l} - t log x - t log y``."""
    val = 0.0
    for m, gm in enumerate(potential.g, start=1):
        val += gm * sum(comb(m, l) ** 2 * x ** (2 * l) * y ** (2 * m - 2 * l) for l in range(m + 1))
    return val - t * np.log(x) - t * np.log(y)


def _circulant(x, y):
    """Circulant bidiagonal matrix; ``x``, ``y`` may carry leading batch axes."""
    x = np.asarray(x, dtype=float)
    m = x.shape[-1]
    C = np.zeros(x.shape + (m,))
    idx = np.arange(m)
    C[..., idx, idx] = x
    C[..., (idx + 1) % m, idx] -= y
    return C


def _circulant_grad(g, x, y, t):
    C = _circulant(x, y)
    M = C @ C.T
    W = np.zeros_like(M)
    Mp = np.eye(len(x))
    for p, gp in enumerate(g, start=1):
        W += p * gp * Mp
        Mp = Mp @ M
    G = 2.0 * W @ C
    idx = np.arange(len(x))
    gx = G[idx, idx] - t / x
    gy = -G[(idx + 1) % len(x), idx] - t / y
    return gx, gy


def _circulant_hvp(g, x, y, t, vx, vy):
    """Hessian-vector products; ``vx``, ``vy`` may be batched as ``(B, m)``."""
    m = len(x)
    C = _circulant(x, y)
    dC = _circulant(vx, vy)
    Ct = np.swapaxes(C, -1, -2)
    M = C @ Ct
    dM = dC @ Ct + C @ np.swapaxes(dC, -1, -2)
    pw = [np.eye(m)]
    for _ in range(len(g)):
        pw.append(pw[-1] @ M)
    W = np.zeros_like(M)
    dW = np.zeros_like(dM)
    for p, gp in enumerate(g, start=1):
        W += p * gp * pw[p - 1]
        for j in range(p - 1):
            dW += p * gp * pw[j] @ dM @ pw[p - 2 - j]
    dG = 2.0 * (dW @ C + W @ dC)
    idx = np.arange(m)
    hx = dG[..., idx, idx] + t / x**2 * vx
    hy = -dG[..., (idx + 1) % m, idx] + t / y**2 * vy
    return hx, hy


def circulant_coarse_hessian(potential: ValidatedPotential, t: float, size: int = 64, at=None):
    """Dense Hessian of ``tr V(C C^T) - t sum(log x_k + log y_k)``.

    ``C`` is the ``size x size`` circulant bidiagonal matrix; variables are
    interleaved ``(x_1, y_1, ..., x_size, y_size)``.  Evaluated at constant
    entries ``at`` (default ``phi(t)``).
    """
    if size <= potential.degree:
        raise ConfigError("circulant block must be larger than the degree")
    if at is None:
        at = float(ScalingFunctions(potential).phi(t))
    x = np.full(size, float(at))
    y = np.full(size, float(at))
    N = 2 * size
    E = np.eye(N)
    hx, hy = _circulant_hvp(potential.g, x, y, t, E[:, 0::2], E[:, 1::2])
    H = np.empty((N, N))
    H[0::2, :] = hx.T
    H[1::2, :] = hy.T
    return H


def alternating_eigenvalue(sf: ScalingFunctions, t: float) -> float:
    """Predicted eigenvalue ``2 theta / (phi^2 theta')`` of the alternating vector."""
    return 2.0 * sf.theta(t) / (sf.phi(t) ** 2 * sf.theta_prime(t))
