"""Polynomial potentials and the deterministic scaling functions built from them.

A potential ``V(x) = sum_m g_m x**m`` enters everywhere through the coarse
minimizer ``phi``, defined as the positive root of

    t = sum_m m * C(2m, m) * g_m * phi**(2m),   t in [0, 1],

the time change ``theta(t) = kappa * I(t)**2`` with ``I(t) = int_0^t du/phi(u)``
and ``kappa`` fixed by ``theta(1) = 1``, and the O(1/n) corrections ``x1, y1``
that turn ``phi`` into the fine minimizer of the Hamiltonian.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import (
    EmptyPotential,
    NotUniformlyConvex,
    OutOfDomain,
    QuadratureFailure,
)

__all__ = [
    "ValidatedPotential",
    "ScalingFunctions",
    "validate_potential",
    "theta_and_kappa",
    "LINEAR",
]

_GRID_POINTS = 10_000
_GL_NODES = 64
_QUAD_TOL = 1e-10


@dataclass(frozen=True)
class ValidatedPotential:
    """Polynomial potential with a numerical uniform-convexity certificate.

    ``g[m-1]`` is the coefficient of ``x**m``.  ``convexity_margin`` is the
    minimum of ``d^2/dx^2 V(x^2)`` over a dense grid of ``[0, range_hi]``.
    """

    g: tuple
    convexity_margin: float
    range_hi: float

    @property
    def degree(self) -> int:
        return len(self.g)

    @property
    def coefficients(self) -> np.ndarray:
        return np.asarray(self.g, dtype=float)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.polynomial.polynomial.polyval(x, np.concatenate([[0.0], self.coefficients]))

    def is_linear_half(self) -> bool:
        """True for the Laguerre potential ``V(x) = x/2``."""
        return self.g == (0.5,)


def _root_poly(g: np.ndarray) -> np.ndarray:
    """Coefficients (in u = phi^2, constant term first) of the defining relation."""
    c = np.zeros(len(g) + 1)
    for m in range(1, len(g) + 1):
        c[m] = m * comb(2 * m, m) * g[m - 1]
    return c


def _second_derivative_on_grid(g: np.ndarray, x: np.ndarray) -> np.ndarray:
    # d^2/dx^2 sum g_m x^{2m} = sum g_m 2m(2m-1) x^{2m-2}
    out = np.zeros_like(x)
    x2 = x * x
    for m in range(len(g), 0, -1):
        out = out * x2 + g[m - 1] * 2 * m * (2 * m - 1)
    return out


def _solve_u(c: np.ndarray, t: np.ndarray, max_iter: int = 200) -> np.ndarray:
    """Positive root u of sum_m c[m] u^m = t, vectorized safeguarded Newton."""
    t = np.asarray(t, dtype=float)
    deg = len(c) - 1
    p = np.polynomial.polynomial.polyval
    dc = np.array([m * c[m] for m in range(1, deg + 1)])

    lo = np.zeros_like(t)
    hi = np.where(t > 0, t / c[1], 0.0) + 1e-300
    # c[1] = 2 g_1 > 0; higher terms may be negative, so expand until bracketed
    for _ in range(200):
        short = p(hi, c) < t
        if not short.any():
            break
        lo = np.where(short, hi, lo)
        hi = np.where(short, 2.0 * hi, hi)
    else:  # pragma: no cover - only for pathological potentials
        raise NotUniformlyConvex("could not bracket the root of the defining relation")

    u = np.where(t > 0, np.minimum(t / c[1], hi), 0.0)
    u = np.clip(u, lo, hi)
    for _ in range(max_iter):
        f = p(u, c) - t
        lo = np.where(f < 0, u, lo)
        hi = np.where(f > 0, u, hi)
        df = p(u, dc)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = f / df
        new = u - step
        bad = ~np.isfinite(new) | (new <= lo) | (new >= hi)
        new = np.where(bad, 0.5 * (lo + hi), new)
        done = np.abs(new - u) <= 4e-16 * np.abs(new)
        u = new
        if done.all():
            break
    return np.where(t > 0, u, 0.0)


def validate_potential(g, range_hi: float | None = None) -> ValidatedPotential:
    """Check that ``x -> V(x^2)`` is uniformly convex and wrap the coefficients.

    Parameters
    ----------
    g : sequence of float
        Coefficients ``g_1..g_d`` of ``V(x) = sum g_m x^m``.
    range_hi : float, optional
        Upper end of the grid used for the convexity certificate.  Defaults to
        ``2 * (phi(1) + 1)``.

    Raises
    ------
    EmptyPotential
        If ``g`` is empty.
    NotUniformlyConvex
        If the second derivative of ``V(x^2)`` is not positive on the grid or
        the leading coefficient is not positive.
    """
    g_arr = np.atleast_1d(np.asarray(g, dtype=float))
    if g_arr.size == 0:
        raise EmptyPotential("potential needs at least one coefficient")
    if not np.all(np.isfinite(g_arr)):
        raise NotUniformlyConvex("non-finite coefficient")
    # trailing zeros do not change V
    while g_arr.size > 1 and g_arr[-1] == 0.0:
        g_arr = g_arr[:-1]
    if g_arr[0] <= 0:
        raise NotUniformlyConvex(f"g_1 = {g_arr[0]} must be positive")
    if g_arr[-1] <= 0:
        raise NotUniformlyConvex("leading coefficient must be positive for convexity at infinity")
    if range_hi is None:
        phi1 = float(np.sqrt(_solve_u(_root_poly(g_arr), np.array([1.0]))[0]))
        range_hi = 2.0 * (phi1 + 1.0)
    if range_hi <= 0:
        raise ValueError("range_hi must be positive")
    x = np.linspace(0.0, range_hi, _GRID_POINTS)
    margin = float(_second_derivative_on_grid(g_arr, x).min())
    if margin <= 0:
        raise NotUniformlyConvex(f"d^2/dx^2 V(x^2) reaches {margin:.3g} on [0, {range_hi:.3g}]")
    return ValidatedPotential(tuple(float(v) for v in g_arr), margin, float(range_hi))


LINEAR = validate_potential([0.5])


def _gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(frozen=True, eq=False)
class ScalingFunctions:
    """phi, theta, kappa and the fine corrections for one potential.

    All methods accept scalars or arrays and are pure; instances are safe to
    share between threads.
    """

    potential: ValidatedPotential
    kappa: float = field(init=False)
    quadrature_error: float = field(init=False)
    _c: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_c", _root_poly(self.potential.coefficients))
        total, err = self._integral_with_error(np.array([1.0]))
        if err > _QUAD_TOL:
            raise QuadratureFailure(f"estimated quadrature error {err:.2e} > {_QUAD_TOL}")
        object.__setattr__(self, "kappa", float(total[0]) ** -2)
        object.__setattr__(self, "quadrature_error", float(err))

    @classmethod
    def from_coefficients(cls, g) -> "ScalingFunctions":
        return cls(validate_potential(g))

    # -- coarse minimizer -------------------------------------------------
    def phi(self, t):
        """Coarse minimizer: the unique positive root of the defining relation."""
        t_arr = np.asarray(t, dtype=float)
        if np.any((t_arr < 0) | (t_arr > 1)) or not np.all(np.isfinite(t_arr)):
            raise OutOfDomain("phi is defined for t in [0, 1]")
        out = np.sqrt(_solve_u(self._c, t_arr))
        return out if out.ndim else float(out)

    def defining_relation(self, phi):
        """Right-hand side ``sum_m m C(2m,m) g_m phi^{2m}``."""
        phi = np.asarray(phi, dtype=float)
        return np.polynomial.polynomial.polyval(phi * phi, self._c)

    def phi_derivs(self, t):
        """Return ``(phi', phi'')`` by implicit differentiation; requires t > 0."""
        t_arr = np.asarray(t, dtype=float)
        if np.any((t_arr <= 0) | (t_arr > 1)):
            raise OutOfDomain("phi derivatives diverge at t = 0; need t in (0, 1]")
        p = np.asarray(self.phi(t_arr))
        c = self._c
        d1 = np.zeros_like(p)
        d2 = np.zeros_like(p)
        for m in range(1, len(c)):
            d1 = d1 + 2 * m * c[m] * p ** (2 * m - 1)
            d2 = d2 + 2 * m * (2 * m - 1) * c[m] * p ** (2 * m - 2)
        dphi = 1.0 / d1
        ddphi = -d2 * dphi**3
        if dphi.ndim == 0:
            return float(dphi), float(ddphi)
        return dphi, ddphi

    # -- time change --------------------------------------------------------
    def _integral_with_error(self, t):
        """int_0^t du/phi(u) for sorted-or-not t, plus an error estimate.

        With u = v^2 the integrand becomes 2v/phi(v^2), which is bounded and
        smooth at v = 0.  Panels are geometric toward 0, refined at every
        requested endpoint, 64-point Gauss-Legendre on each.
        """
        t = np.asarray(t, dtype=float)
        s = np.sqrt(t.ravel())
        geo = 2.0 ** -np.arange(24, -1, -1)
        breaks = np.unique(np.concatenate([[0.0], geo, s]))
        value = self._panel_sums(breaks, _GL_NODES)
        coarse = self._panel_sums(breaks, _GL_NODES // 2)
        cum = np.concatenate([[0.0], np.cumsum(value)])
        cum_c = np.concatenate([[0.0], np.cumsum(coarse)])
        idx = np.searchsorted(breaks, s)
        out = cum[idx].reshape(t.shape)
        err = float(np.max(np.abs(cum - cum_c)))
        return out, err

    def _panel_sums(self, breaks, nodes):
        x, w = _gauss_legendre(nodes)
        a = breaks[:-1, None]
        h = np.diff(breaks)[:, None]
        v = a + h * x[None, :]
        f = 2.0 * v / np.asarray(self.phi(v * v))
        return (f * w[None, :] * h).sum(axis=1)

    def integral_inv_phi(self, t):
        """``I(t) = int_0^t du / phi(u)``."""
        t_arr = np.asarray(t, dtype=float)
        if np.any((t_arr < 0) | (t_arr > 1)):
            raise OutOfDomain("t must lie in [0, 1]")
        out, _ = self._integral_with_error(t_arr)
        return out if out.ndim else float(out)

    def theta(self, t):
        out = self.kappa * np.asarray(self.integral_inv_phi(t)) ** 2
        return out if out.ndim else float(out)

    def theta_prime(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr <= 0):
            raise OutOfDomain("theta' needs t > 0")
        out = 2.0 * self.kappa * np.asarray(self.integral_inv_phi(t_arr)) / np.asarray(self.phi(t_arr))
        return out if out.ndim else float(out)

    def _integral_poly(self, p):
        # int_0^t du/phi(u) = sum_m 2m/(2m-1) c_m phi^{2m-1} after u = F(phi)
        c = self._c
        out = np.zeros_like(p)
        for m in range(len(c) - 1, 0, -1):
            out = out + 2 * m / (2 * m - 1) * c[m] * p ** (2 * m - 1)
        return out

    def integral_closed_form(self, t):
        """``I(t)`` evaluated exactly as a polynomial in ``phi(t)``."""
        out = self._integral_poly(np.asarray(self.phi(t), dtype=float))
        return out if out.ndim else float(out)

    def theta_inverse(self, u, iters: int = 80):
        """Solve ``theta(t) = u`` for ``t`` in ``[0, 1]``."""
        u = np.asarray(u, dtype=float)
        if np.any((u < 0) | (u > 1)):
            raise OutOfDomain("theta^{-1} is defined on [0, 1]")
        target = np.sqrt(u / self.kappa)
        lo = np.zeros_like(u)
        hi = np.full_like(u, float(self.phi(1.0)) * 1.01 + 1e-12)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            below = self._integral_poly(mid) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        p = 0.5 * (lo + hi)
        out = np.clip(self.defining_relation(p), 0.0, 1.0)
        return out if out.ndim else float(out)

    @property
    def hard_edge_constant(self) -> float:
        """Factor c with ``c * n^2 * lambda_k -> Lambda_k``; equals 1/(4 kappa)."""
        return 1.0 / (4.0 * self.kappa)

    # -- fine minimizer -----------------------------------------------------
    def fine_correction(self, beta, a, t):
        """Return ``(x1(t), y1(t))``, the O(1/n) corrections to phi."""
        t_arr = np.asarray(t, dtype=float)
        if np.any((t_arr <= 0) | (t_arr > 1)):
            raise OutOfDomain("fine corrections need t in (0, 1]")
        dphi, _ = self.phi_derivs(t_arr)
        diff = (a + 0.5) / np.asarray(self.integral_inv_phi(t_arr)) - 0.5 * np.asarray(dphi)
        total = (a - 2.0 / beta) * np.asarray(dphi)
        x1 = 0.5 * (total + diff)
        y1 = 0.5 * (total - diff)
        if x1.ndim == 0:
            return float(x1), float(y1)
        return x1, y1

    def fine_minimizer(self, beta, a, n: int):
        """Fine minimizer ``(x_hat[1..n], y_hat[1..n-1])``.

        Entries are floored at ``phi(i/n)/2``; the floor only bites for
        ``i = O(1)`` where the asymptotic correction is not small.
        """
        if n < 2:
            raise ValueError("fine minimizer needs n >= 2")
        t = np.arange(1, n + 1) / n
        p = np.asarray(self.phi(t))
        x1, y1 = self.fine_correction(beta, a, t)
        x = np.maximum(p + x1 / n, 0.5 * p)
        y = np.maximum(p + y1 / n, 0.5 * p)[:-1]
        return x, y


def theta_and_kappa(sf_or_potential):
    """Return ``(theta, kappa)``: the time-change callable and its constant."""
    sf = sf_or_potential
    if not isinstance(sf, ScalingFunctions):
        if not isinstance(sf, ValidatedPotential):
            sf = validate_potential(sf)
        sf = ScalingFunctions(sf)
    return sf.theta, sf.kappa
