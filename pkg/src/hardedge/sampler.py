"""Sampling the bidiagonal Gibbs measure ``exp(-n beta H)``.

For ``V(x) = x/2`` the entries are independent scaled chi variables and are
drawn exactly.  For general polynomial potentials a preconditioned
Metropolis-adjusted Langevin (MALA) chain is run on the positive orthant;
independent chains are advanced together as a batch.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AdaptationFailure,
    ConfigError,
    NonPositiveParameter,
    WrongPotential,
)
from .hamiltonian import (
    HamiltonianParams,
    grad_hamiltonian,
    hamiltonian,
    hessian_hamiltonian,
    pack,
    unpack,
    value_and_grad,
)
from .potential import validate_potential

__all__ = [
    "BidiagonalSample",
    "ChainConfig",
    "MalaKernel",
    "chi_variate",
    "sample_laguerre_exact",
    "sample_laguerre_batch",
    "sample_mcmc",
    "sample_mcmc_arrays",
    "derive_stream_seed",
    "write_frame",
    "read_frame",
    "write_csv",
]


@dataclass(frozen=True)
class BidiagonalSample:
    x: np.ndarray
    y: np.ndarray
    params: HamiltonianParams
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(~(self.x > 0)) or np.any(~(self.y > 0)):
            raise ValueError("sample entries must be strictly positive")


@dataclass(frozen=True)
class ChainConfig:
    """MALA settings.

    ``burn_in`` and ``thin`` default to ``50 n`` and ``max(1, n // 10)``.
    ``step_size`` is the initial scalar step in preconditioned units (default
    ``1.65 * dim**(-1/6)``); it is adapted towards ``target_accept`` during
    burn-in and then frozen.
    """

    burn_in: int | None = None
    thin: int | None = None
    step_size: float | None = None
    target_accept: float = 0.574
    seed: int = 0
    n_chains: int = 1

    def __post_init__(self):
        if self.burn_in is not None and self.burn_in < 1:
            raise ConfigError("burn_in must be >= 1")
        if self.thin is not None and self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.step_size is not None and not self.step_size > 0:
            raise ConfigError("step_size must be positive")
        if not 0 < self.target_accept < 1:
            raise ConfigError("target_accept must lie in (0, 1)")
        if self.n_chains < 1:
            raise ConfigError("n_chains must be >= 1")

    def resolved(self, n: int) -> "ChainConfig":
        dim = 2 * n - 1
        return ChainConfig(
            burn_in=self.burn_in if self.burn_in is not None else 50 * n,
            thin=self.thin if self.thin is not None else max(1, n // 10),
            step_size=self.step_size if self.step_size is not None else 1.65 * dim ** (-1.0 / 6.0),
            target_accept=self.target_accept,
            seed=self.seed,
            n_chains=self.n_chains,
        )


def chi_variate(r, rng, size=None):
    """Draw chi variates with ``r`` degrees of freedom (any ``r > 0``)."""
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise NonPositiveParameter(f"degrees of freedom must be positive, got {r}")
    out = np.sqrt(rng.chisquare(r, size=size))
    return float(out) if np.ndim(out) == 0 else out


def _require_linear(params):
    if not params.potential.is_linear_half():
        raise WrongPotential("exact sampling requires V(x) = x/2")


def sample_laguerre_batch(params: HamiltonianParams, rng, size: int):
    """Arrays ``X[size, n]``, ``Y[size, n-1]`` of independent exact samples."""
    _require_linear(params)
    n, beta, a = params.n, params.beta, params.a
    k = np.arange(1, n + 1, dtype=float)
    scale = 1.0 / np.sqrt(n * beta)
    X = scale * np.sqrt(rng.chisquare(beta * (k + a), size=(size, n)))
    Y = scale * np.sqrt(rng.chisquare(beta * k[:-1], size=(size, n - 1)))
    return X, Y


def sample_laguerre_exact(params: HamiltonianParams, rng) -> BidiagonalSample:
    """``X_i ~ chi_{beta(i+a)} / sqrt(n beta)``, ``Y_i ~ chi_{beta i} / sqrt(n beta)``."""
    X, Y = sample_laguerre_batch(params, rng, 1)
    return BidiagonalSample(X[0], Y[0], params, {"method": "exact_chi"})


class MalaKernel:
    """Preconditioned MALA transition for the target ``exp(-n beta H)``.

    The proposal is ``z' = z - (eps^2/2) D grad U(z) + eps sqrt(D) xi`` with
    ``U = n beta H`` and fixed diagonal ``D`` (inverse diagonal Hessian of
    ``U`` at the fine minimizer).
    """

    def __init__(self, params: HamiltonianParams, precond=None):
        self.params = params
        self.nb = params.n * params.beta
        if precond is None:
            precond = self._default_precond()
        self.D = np.asarray(precond, dtype=float)
        self.sqrtD = np.sqrt(self.D)

    def _default_precond(self):
        p = self.params
        z0 = self.initial_state()
        H = hessian_hamiltonian(p, *unpack(z0))
        return 1.0 / (self.nb * H.ab[H.bandwidth])

    def initial_state(self):
        p = self.params
        if p.n == 1:
            return np.array([float(p.scaling.phi(1.0))])
        return pack(*p.scaling.fine_minimizer(p.beta, p.a, p.n))

    def potential(self, z):
        return self.nb * hamiltonian(self.params, *unpack(z))

    def grad_potential(self, z):
        return self.nb * grad_hamiltonian(self.params, *unpack(z))

    def potential_and_grad(self, z):
        val, grad = value_and_grad(self.params, *unpack(z))
        return self.nb * val, self.nb * grad

    def log_q(self, to, frm, grad_frm, eps):
        """Log proposal density ``q(to | frm)`` up to a constant."""
        r = to - frm + 0.5 * eps**2 * self.D * grad_frm
        return -0.5 * np.sum(r * r / self.D, axis=-1) / eps**2

    def log_accept_ratio(self, z, zp, eps):
        """Metropolis-Hastings log ratio for the move ``z -> zp``."""
        Uz, Uzp = self.potential(z), self.potential(zp)
        gz, gzp = self.grad_potential(z), self.grad_potential(zp)
        return (Uz - Uzp) + self.log_q(z, zp, gzp, eps) - self.log_q(zp, z, gz, eps)

    def propose(self, z, grad, eps, rng):
        xi = rng.standard_normal(z.shape)
        return z - 0.5 * eps**2 * self.D * grad + eps * self.sqrtD * xi


def _step(kernel, z, U, G, eps, rng):
    """One batched MALA step; returns the new state and acceptance mask."""
    zp = kernel.propose(z, G, eps, rng)
    logu = np.log(rng.uniform(size=z.shape[0]))
    inside = np.all(zp > 0, axis=-1)
    accept = np.zeros(z.shape[0], dtype=bool)
    if inside.any():
        zi = zp[inside]
        Up, Gp = kernel.potential_and_grad(zi)
        la = (U[inside] - Up) + kernel.log_q(z[inside], zi, Gp, eps) - kernel.log_q(zi, z[inside], G[inside], eps)
        ok = logu[inside] < la
        idx = np.flatnonzero(inside)[ok]
        accept[idx] = True
        z = z.copy()
        U = U.copy()
        G = G.copy()
        z[idx], U[idx], G[idx] = zi[ok], Up[ok], Gp[ok]
    return z, U, G, accept


def sample_mcmc_arrays(params: HamiltonianParams, cfg: ChainConfig, n_samples: int):
    """Run the batched chains; return ``(X, Y, meta)``.

    Chains start at the fine minimizer.  After burn-in every ``thin``-th state
    of every chain is emitted, ordered by time and then by chain.
    """
    if n_samples < 1:
        raise ConfigError("n_samples must be >= 1")
    cfg = cfg.resolved(params.n)
    rng = np.random.default_rng(cfg.seed)
    kernel = MalaKernel(params)
    nc = cfg.n_chains
    z = np.tile(kernel.initial_state(), (nc, 1))
    U, G = kernel.potential_and_grad(z)
    log_eps = np.log(cfg.step_size)
    for t in range(1, cfg.burn_in + 1):
        z, U, G, acc = _step(kernel, z, U, G, np.exp(log_eps), rng)
        log_eps += (acc.mean() - cfg.target_accept) / t**0.6
    eps = float(np.exp(log_eps))
    per_chain = -(-n_samples // nc)
    out = np.empty((per_chain, nc, z.shape[1]))
    n_acc = 0
    for s in range(per_chain):
        for _ in range(cfg.thin):
            z, U, G, acc = _step(kernel, z, U, G, eps, rng)
            n_acc += int(acc.sum())
        out[s] = z
    rate = n_acc / (per_chain * cfg.thin * nc)
    if not 0.05 <= rate <= 0.95:
        raise AdaptationFailure(f"acceptance rate {rate:.3f} outside [0.05, 0.95] (step {eps:.3g})")
    out = out.reshape(-1, z.shape[1])[:n_samples]
    X, Y = unpack(out)
    meta = {
        "method": "mcmc",
        "seed": cfg.seed,
        "burn_in": cfg.burn_in,
        "thin": cfg.thin,
        "n_chains": nc,
        "step_size": eps,
        "acceptance_rate": rate,
        "beta_is_one": params.beta == 1.0,
    }
    return np.ascontiguousarray(X), np.ascontiguousarray(Y), meta


def sample_mcmc(params: HamiltonianParams, cfg: ChainConfig, n_samples: int):
    """List of :class:`BidiagonalSample` drawn by MALA; see :func:`sample_mcmc_arrays`."""
    X, Y, meta = sample_mcmc_arrays(params, cfg, n_samples)
    return [BidiagonalSample(x, y, params, meta) for x, y in zip(X, Y)]


_MASK64 = (1 << 64) - 1


def derive_stream_seed(master_seed, replica_index):
    """Per-replica 64-bit seed from a master seed (splitmix64 finalizer).

    ``mix(mix(master) + golden * (index + 1))`` with the standard splitmix64
    constants.  Vectorizes over numpy integer arrays.
    """
    golden = np.uint64(0x9E3779B97F4A7C15)

    def mix(v):
        v = (v ^ (v >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        v = (v ^ (v >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return v ^ (v >> np.uint64(31))

    scalar = np.ndim(master_seed) == 0 and np.ndim(replica_index) == 0
    if np.ndim(master_seed) == 0:
        m = np.uint64(int(master_seed) & _MASK64)
    else:
        m = np.asarray(master_seed).astype(np.uint64)
    i = np.asarray(replica_index).astype(np.uint64)
    with np.errstate(over="ignore"):
        out = mix(mix(m + golden) + golden * (i + np.uint64(1)))
    return int(out) if scalar else out


# -- serialization ------------------------------------------------------------

def _header(params: HamiltonianParams, seed: int):
    g = params.potential.g
    head = np.array([params.n, params.beta, params.a, len(g), *g], dtype="<f8").tobytes()
    return head + struct.pack("<Q", int(seed) & _MASK64)


def write_frame(path, params: HamiltonianParams, X, Y, seed: int = 0):
    """Binary frame: little-endian float64 header ``[n, beta, a, d, g_1..g_d]``,
    the seed as raw uint64, then per sample the x-block and the y-block."""
    X = np.atleast_2d(np.asarray(X, dtype="<f8"))
    Y = np.atleast_2d(np.asarray(Y, dtype="<f8")).reshape(X.shape[0], -1)
    with open(path, "wb") as fh:
        fh.write(_header(params, seed))
        fh.write(np.concatenate([X, Y], axis=1).astype("<f8").tobytes())


def read_frame(path):
    """Inverse of :func:`write_frame`; returns ``(params, X, Y, seed)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    n, beta, a, d = np.frombuffer(raw, dtype="<f8", count=4)
    n, d = int(n), int(d)
    g = np.frombuffer(raw, dtype="<f8", count=d, offset=32)
    off = 32 + 8 * d
    (seed,) = struct.unpack_from("<Q", raw, off)
    body = np.frombuffer(raw, dtype="<f8", offset=off + 8).reshape(-1, 2 * n - 1)
    params = HamiltonianParams(validate_potential(list(g)), float(beta), float(a), n)
    return params, body[:, :n].copy(), body[:, n:].copy(), seed


def write_csv(path, X, Y):
    X = np.atleast_2d(X)
    Y = np.atleast_2d(Y)
    n = X.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample"] + [f"x{i}" for i in range(1, n + 1)] + [f"y{i}" for i in range(1, n)])
        for s, (x, y) in enumerate(zip(X, Y)):
            w.writerow([s] + [repr(float(v)) for v in x] + [repr(float(v)) for v in y])
