import numpy as np
import pytest
from scipy import stats

from hardedge.errors import AdaptationFailure, ConfigError, NonPositiveParameter, WrongPotential
from hardedge.hamiltonian import HamiltonianParams, minimize
from hardedge.potential import LINEAR, validate_potential
from hardedge.sampler import (
    BidiagonalSample,
    ChainConfig,
    MalaKernel,
    chi_variate,
    derive_stream_seed,
    read_frame,
    sample_laguerre_batch,
    sample_laguerre_exact,
    sample_mcmc,
    sample_mcmc_arrays,
    write_csv,
    write_frame,
)

QUARTIC = [0.5, 0.125]


@pytest.mark.parametrize("r", [2.0, 1.0, 0.4])
def test_chi_second_moment(r):
    rng = np.random.default_rng(0)
    v = chi_variate(r, rng, size=100_000)
    assert np.all(v > 0)
    assert np.mean(v**2) == pytest.approx(r, rel=0.02)


def test_chi_scalar_and_errors():
    assert isinstance(chi_variate(3.0, np.random.default_rng(1)), float)
    with pytest.raises(NonPositiveParameter):
        chi_variate(0.0, np.random.default_rng(1))


def test_laguerre_second_moments():
    n, a = 20, 0.7
    params = HamiltonianParams(LINEAR, 2.0, a, n)
    X, Y = sample_laguerre_batch(params, np.random.default_rng(2), 40_000)
    k = np.arange(1, n + 1)
    se = np.sqrt(2 * (k + a) / (params.beta * n * n) / 40_000)
    assert np.all(np.abs(np.mean(X**2, axis=0) - (k + a) / n) <= 5 * se)
    assert np.allclose(np.mean(Y**2, axis=0), k[:-1] / n, rtol=0.02)


def test_laguerre_mode_of_last_entry():
    n, beta, a = 50, 2.0, 0.0
    params = HamiltonianParams(LINEAR, beta, a, n)
    X, _ = sample_laguerre_batch(params, np.random.default_rng(3), 50_000)
    kde = stats.gaussian_kde(X[:, -1])
    grid = np.linspace(0.8, 1.2, 2001)
    mode = grid[np.argmax(kde(grid))]
    assert mode == pytest.approx(np.sqrt((n + a - 1 / beta) / n), abs=0.01)


def test_laguerre_deterministic():
    params = HamiltonianParams(LINEAR, 2.0, 0.0, 30)
    s1 = sample_laguerre_exact(params, np.random.default_rng(42))
    s2 = sample_laguerre_exact(params, np.random.default_rng(42))
    assert np.array_equal(s1.x, s2.x) and np.array_equal(s1.y, s2.y)
    assert isinstance(s1, BidiagonalSample)


def test_laguerre_wrong_potential():
    params = HamiltonianParams(validate_potential(QUARTIC), 2.0, 0.0, 10)
    with pytest.raises(WrongPotential):
        sample_laguerre_exact(params, np.random.default_rng(0))


def test_chain_config_defaults_and_validation():
    cfg = ChainConfig().resolved(100)
    assert cfg.burn_in == 5000 and cfg.thin == 10
    assert cfg.step_size == pytest.approx(1.65 * 199 ** (-1 / 6))
    with pytest.raises(ConfigError):
        ChainConfig(thin=0)
    with pytest.raises(ConfigError):
        ChainConfig(target_accept=1.5)


def test_mala_gradient_matches_potential():
    params = HamiltonianParams(validate_potential(QUARTIC), 2.0, 0.0, 8)
    kern = MalaKernel(params)
    z = kern.initial_state() * 1.05
    g = kern.grad_potential(z)
    h = 1e-6
    for j in range(z.size):
        e = np.zeros_like(z)
        e[j] = h
        assert (kern.potential(z + e) - kern.potential(z - e)) / (2 * h) == pytest.approx(g[j], rel=1e-5)


def test_mcmc_matches_exact_linear():
    n = 40
    params = HamiltonianParams(LINEAR, 2.0, 0.0, n)
    X, Y, meta = sample_mcmc_arrays(params, ChainConfig(burn_in=600, thin=8, seed=1, n_chains=200), 2000)
    Xe, Ye = sample_laguerre_batch(params, np.random.default_rng(9), 2000)
    for j in (0, n // 2, n - 1):
        assert stats.ks_2samp(X[:, j], Xe[:, j]).statistic <= 0.05
    assert stats.ks_2samp(Y[:, n // 2], Ye[:, n // 2]).statistic <= 0.05
    assert 0.3 < meta["acceptance_rate"] < 0.8


def test_mcmc_concentration_quartic():
    n = 400
    params = HamiltonianParams(validate_potential(QUARTIC), 2.0, 0.0, n)
    X, _, _ = sample_mcmc_arrays(params, ChainConfig(burn_in=800, thin=40, seed=2, n_chains=100), 200)
    x0 = minimize(params).x
    bulk = slice(n // 10, 9 * n // 10)
    frac = np.mean(np.abs(X[:, bulk] - x0[bulk]) > 5 / np.sqrt(n))
    assert frac <= 0.05


def test_mcmc_deterministic_and_list_api():
    params = HamiltonianParams(validate_potential(QUARTIC), 2.0, 0.0, 12)
    cfg = ChainConfig(burn_in=50, thin=2, seed=5, n_chains=3)
    a = sample_mcmc(params, cfg, 6)
    b = sample_mcmc(params, cfg, 6)
    assert len(a) == 6
    assert all(np.array_equal(s.x, t.x) and np.array_equal(s.y, t.y) for s, t in zip(a, b))
    assert a[0].provenance["seed"] == 5


def test_mcmc_adaptation_failure():
    params = HamiltonianParams(validate_potential(QUARTIC), 2.0, 0.0, 12)
    with pytest.raises(AdaptationFailure):
        sample_mcmc_arrays(params, ChainConfig(burn_in=200, thin=1, seed=0, target_accept=0.99), 50)


def test_stream_seed_determinism_and_collisions():
    assert derive_stream_seed(123, 4) == derive_stream_seed(123, 4)
    rng = np.random.default_rng(0)
    masters = rng.integers(0, 2**63, size=1_000_000, dtype=np.uint64)
    s0 = derive_stream_seed(masters, 0)
    s1 = derive_stream_seed(masters, 1)
    assert not np.any(s0 == s1)
    assert np.unique(s0).size == masters.size == np.unique(masters).size


def test_frame_roundtrip(tmp_path):
    params = HamiltonianParams(validate_potential(QUARTIC), 1.5, 0.25, 6)
    rng = np.random.default_rng(0)
    X, Y = rng.uniform(0.5, 1, (3, 6)), rng.uniform(0.5, 1, (3, 5))
    path = tmp_path / "s.bin"
    write_frame(path, params, X, Y, seed=2**64 - 5)
    p2, X2, Y2, seed = read_frame(path)
    assert p2 == params and seed == 2**64 - 5
    assert np.array_equal(X, X2) and np.array_equal(Y, Y2)


def test_csv_output(tmp_path):
    X, Y = np.ones((2, 3)), np.full((2, 2), 0.5)
    path = tmp_path / "s.csv"
    write_csv(path, X, Y)
    lines = path.read_text().splitlines()
    assert lines[0] == "sample,x1,x2,x3,y1,y2"
    assert len(lines) == 3
