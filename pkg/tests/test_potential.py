import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardedge.errors import EmptyPotential, NotUniformlyConvex, OutOfDomain
from hardedge.potential import LINEAR, ScalingFunctions, theta_and_kappa, validate_potential

QUARTIC = [0.5, 0.125]


@pytest.fixture(scope="module")
def sf_lin():
    return ScalingFunctions(LINEAR)


@pytest.fixture(scope="module")
def sf_q():
    return ScalingFunctions(validate_potential(QUARTIC))


def test_validate_linear_margin():
    v = validate_potential([0.5])
    assert v.convexity_margin == pytest.approx(1.0)


def test_validate_quartic():
    v = validate_potential(QUARTIC)
    assert v.convexity_margin == pytest.approx(1.0)
    assert v.degree == 2


def test_validate_rejects_nonconvex():
    with pytest.raises(NotUniformlyConvex):
        validate_potential([-1.0, 1.0])


def test_validate_rejects_empty():
    with pytest.raises(EmptyPotential):
        validate_potential([])


def test_phi_linear(sf_lin):
    assert sf_lin.phi(0.25) == pytest.approx(0.5, abs=1e-14)
    assert sf_lin.phi(0.0) == 0.0


def test_phi_quartic_root(sf_q):
    # m = 2 coefficient is 2 * C(4, 2) * 0.125 = 1.5
    p = sf_q.phi(0.5)
    assert p * p + 1.5 * p**4 == pytest.approx(0.5, abs=1e-13)


def test_phi_out_of_domain(sf_lin):
    with pytest.raises(OutOfDomain):
        sf_lin.phi(1.5)
    with pytest.raises(OutOfDomain):
        sf_lin.phi(-0.1)


def test_phi_derivs_linear(sf_lin):
    d1, d2 = sf_lin.phi_derivs(0.25)
    assert d1 == pytest.approx(1.0)
    assert d2 == pytest.approx(-2.0)
    assert sf_lin.phi_derivs(1.0)[0] == pytest.approx(0.5)


def test_phi_derivs_zero_raises(sf_lin):
    with pytest.raises(OutOfDomain):
        sf_lin.phi_derivs(0.0)


@pytest.mark.parametrize("t", [0.1, 0.5, 0.9])
def test_phi_derivs_finite_difference(sf_q, t):
    h = 1e-5
    d1, d2 = sf_q.phi_derivs(t)
    fd1 = (sf_q.phi(t + h) - sf_q.phi(t - h)) / (2 * h)
    fd2 = (sf_q.phi(t + h) - 2 * sf_q.phi(t) + sf_q.phi(t - h)) / h**2
    assert fd1 == pytest.approx(d1, rel=1e-6)
    assert fd2 == pytest.approx(d2, rel=1e-3)


def test_theta_kappa_linear(sf_lin):
    t = np.linspace(0, 1, 101)
    assert np.max(np.abs(sf_lin.theta(t) - t)) <= 1e-10
    assert sf_lin.kappa == pytest.approx(0.25, abs=1e-12)


def test_theta_and_kappa_helper():
    theta, kappa = theta_and_kappa(LINEAR)
    assert kappa == pytest.approx(0.25)
    assert theta(0.3) == pytest.approx(0.3)


@pytest.mark.parametrize("g", [[0.5], QUARTIC, [0.5, 0.0, 0.05], [1.0, -0.01, 0.01]])
def test_theta_endpoint(g):
    sf = ScalingFunctions(validate_potential(g))
    assert sf.theta(1.0) == pytest.approx(1.0, abs=1e-12)
    assert sf.theta(0.0) == 0.0


def test_theta_quartic_two_resolutions(sf_q):
    quad = sf_q.integral_inv_phi(0.5)
    assert quad == pytest.approx(sf_q.integral_closed_form(0.5), abs=1e-9)
    assert sf_q.quadrature_error <= 1e-10


def test_root_residual_and_monotone(sf_q):
    t = np.linspace(0, 1, 1000)
    p = sf_q.phi(t)
    assert np.max(np.abs(t - sf_q.defining_relation(p))) <= 1e-10
    assert np.all(np.diff(p) > 0)
    assert np.all(np.diff(sf_q.theta(t)) > 0)


def test_small_t_scaling(sf_q):
    t = np.geomspace(1e-6, 1e-2, 50)
    r = sf_q.phi(t) / np.sqrt(t)
    assert np.all((r >= 0.1) & (r <= 10))


def test_fine_correction_linear_examples(sf_lin):
    x1, y1 = sf_lin.fine_correction(2.0, 0.0, 0.25)
    assert x1 == pytest.approx(-0.5)
    assert y1 == pytest.approx(-0.5)
    x1, y1 = sf_lin.fine_correction(1.0, 1.0, 1.0)
    assert x1 == pytest.approx(0.0, abs=1e-12)
    assert y1 == pytest.approx(-0.5)


def test_fine_correction_zero_raises(sf_lin):
    with pytest.raises(OutOfDomain):
        sf_lin.fine_correction(2.0, 0.0, 0.0)


def test_fine_correction_equal_when_balanced(sf_q):
    t = 0.4
    d1, _ = sf_q.phi_derivs(t)
    a = d1 * sf_q.integral_inv_phi(t) / 2 - 0.5
    x1, y1 = sf_q.fine_correction(2.0, a, t)
    assert x1 == pytest.approx(y1, abs=1e-12)


def test_fine_minimizer_last_entry(sf_lin):
    x, y = sf_lin.fine_minimizer(2.0, 0.0, 4)
    x1, _ = sf_lin.fine_correction(2.0, 0.0, 1.0)
    assert x[-1] == pytest.approx(1 + x1 / 4)
    assert y.shape == (3,)


def test_fine_minimizer_linear_rate(sf_lin):
    # bulk error against the exact minimizer scales like 1/n^2
    consts = []
    for n in (1000, 2000):
        x, _ = sf_lin.fine_minimizer(2.0, 0.0, n)
        k = np.arange(1, n + 1)
        exact = np.sqrt((k - 0.5) / n)
        i = slice(n // 10 - 1, 9 * n // 10)
        consts.append(n * n * np.max(np.abs(x[i] - exact[i])))
    assert consts[1] == pytest.approx(consts[0], rel=0.3)


@settings(max_examples=30, deadline=None)
@given(g1=st.floats(0.1, 2.0), g2=st.floats(0.0, 1.0), t=st.floats(0.0, 1.0))
def test_phi_root_property(g1, g2, t):
    sf = ScalingFunctions(validate_potential([g1, g2]))
    p = sf.phi(t)
    assert p >= 0
    assert sf.defining_relation(p) == pytest.approx(t, abs=1e-10)


def test_theta_inverse_roundtrip(sf_q):
    u = np.linspace(0, 1, 21)
    t = sf_q.theta_inverse(u)
    assert np.max(np.abs(sf_q.theta(t) - u)) <= 1e-10
