from fractions import Fraction as Fr

import pytest

from jetpoisson.algebra import JetAlgebra
from jetpoisson.functionals import integrate
from jetpoisson.jetform import (
    JetBounds,
    JetData,
    JetifyError,
    check_euler_on_omega,
    jetify,
)


@pytest.fixture(scope="module")
def jd1(sd16):
    return JetData(sd16, JetAlgebra(1, 1, laurent_min=-60))


def test_v_series_shape(sd16):
    v = sd16.v(1)
    assert v.constant_term() == 0
    assert v.coeff((((1, 0), 1),)) == 1  # identity leading term
    # the only degree-one contribution is the first time itself
    for d in range(1, 6):
        assert v.coeff((((1, d), 1),)) == 0


def test_omega_symmetry(sd16):
    assert sd16.omega(0, 1, 2, 1, 3) == sd16.omega(0, 1, 3, 1, 2)
    assert sd16.omega(1, 1, 0, 1, 4) == sd16.omega(1, 1, 4, 1, 0)


def test_omega_genus0_base(sd16):
    # the (0,0;0,0) two-point function is the coordinate itself
    assert sd16.omega(0, 1, 0, 1, 0) == sd16.v(1)


def test_tau_symmetry_series(sd16):
    # the triple derivative is fully symmetric
    for (p, q, r) in ((0, 1, 2), (1, 1, 3), (0, 2, 2)):
        a = sd16.omega(0, 1, p, 1, q).diff(1, r)
        b = sd16.omega(0, 1, q, 1, r).diff(1, p)
        c = sd16.omega(0, 1, r, 1, p).diff(1, q)
        assert a == b == c


def test_genus0_jet_polynomials(jd1):
    alg = jd1.alg
    u = alg.u(1, 0)
    # the closed form v^(p+q+1) / (p! q! (p+q+1))
    import math

    for (p, q) in ((0, 0), (1, 0), (1, 1), (2, 0), (2, 1)):
        e = jd1.omega_jet(0, 1, p, 1, q)
        k = p + q + 1
        want = (u ** k).scale(Fr(1, math.factorial(p) * math.factorial(q) * k))
        assert e == want, (p, q, str(e))


def test_genus1_jet_anchor(jd1):
    alg = jd1.alg
    u = alg.u
    e = jd1.omega_jet(1, 1, 0, 1, 0)
    want = (u(1, 3) * u(1, 1, -1)).scale(Fr(1, 24)) - (
        u(1, 2) ** 2 * u(1, 1, -2)
    ).scale(Fr(1, 24))
    assert e == want
    cert = jd1.certificates[(1, 1, 0, 1, 0)]
    assert cert.surplus >= 20 and cert.residual_ok and cert.rank == cert.unknowns
    sig = e.grade()
    assert sig.std == 2 and sig.sup == 0


def test_jet_degree_matches_genus(jd1):
    for p in range(0, 4):
        sig = jd1.omega_jet(1, 1, p, 1, 0).grade()
        assert sig is not None and sig.std == 2 and sig.sup == 0


def test_jet_bound_observation(jd1):
    # jets never exceed three per dispersion order at genus one
    for p in range(0, 4):
        assert jd1.omega_jet(1, 1, p, 1, 0).max_jet() <= 3


def test_jetify_underdetermined_by_surplus(sd16):
    alg = JetAlgebra(1, 1, laurent_min=-60)
    f = sd16.omega(1, 1, 0, 1, 0).truncate(3)
    with pytest.raises(JetifyError) as ei:
        jetify(sd16, f, 2, JetBounds(3, -4, 0, surplus=Fr(50)), alg)
    assert ei.value.kind == "underdetermined"


def test_jetify_records_window_cap(sd16):
    alg = JetAlgebra(1, 1, laurent_min=-60)
    f = sd16.omega(1, 1, 0, 1, 0).truncate(3)
    expr, cert = jetify(sd16, f, 2, JetBounds(3, -8, 0), alg)
    # the deep window admits monomials invisible at this order; the
    # certificate says so instead of failing
    assert cert.capped > 0 and cert.residual_ok


def test_jetify_inconsistent(sd16):
    alg = JetAlgebra(1, 1, laurent_min=-60)
    # a series that is not the evaluation of any degree-2 expression
    f = sd16.omega(1, 1, 0, 1, 0) + sd16.v(1)
    with pytest.raises(JetifyError) as ei:
        jetify(sd16, f, 2, JetBounds(3, -4, 0), alg)
    assert ei.value.kind == "inconsistent"


def test_quasi_miura_structure(jd1):
    W = jd1.quasi_miura(1)
    assert W.rational and W.degree_check()
    # corrections are total derivatives: the functionals agree
    corr = W.component(1) - jd1.alg.u(1, 0)
    assert integrate(corr).is_zero


def test_quasi_miura_gmax0(sd16):
    jd = JetData(sd16, JetAlgebra(1, 0))
    assert jd.quasi_miura(0).is_identity


def test_euler_action_on_omega(sd16, conf):
    for g in (0, 1):
        for p in (0, 1, 2):
            r = check_euler_on_omega(sd16, conf, g, 1, 1, p)
            assert r.ok and r.certified_order >= 8


def test_genus2_jet(sd16):
    alg = JetAlgebra(1, 2, laurent_min=-60)
    jd = JetData(sd16, alg)
    e = jd.omega_jet(2, 1, 0, 1, 0)
    sig = e.grade()
    assert sig.std == 4 and e.max_jet() <= 6 and e.min_u11() >= -6
    cert = jd.certificates[(2, 1, 0, 1, 0)]
    assert cert.residual_ok and cert.surplus >= 20
