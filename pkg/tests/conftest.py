import random
import sys
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from jetpoisson.algebra import JetAlgebra
from jetpoisson.cohft import ConformalData, CorrelatorTable, gen_trivial, tilde_R_M
from jetpoisson.hierarchy import first_bracket, hamiltonian_density_w
from jetpoisson.jetform import JetData, SeriesData
from jetpoisson.bihamiltonian import second_bracket, tilde_bracket

FIXTURES = Path(__file__).parent / "fixtures"


def random_monomial(alg, rng, std, sup, max_u0=2):
    """A random monomial of the exact given degrees (may return None)."""
    odd = set()
    odd_std = 0
    for _ in range(sup):
        for _try in range(10):
            v = (rng.randrange(1, alg.n + 1), rng.randrange(0, std + 1))
            if v not in odd and odd_std + v[1] <= std:
                odd.add(v)
                odd_std += v[1]
                break
        else:
            return None
    even = {}
    left = std - odd_std
    while left > 0:
        s = rng.randrange(1, left + 1)
        v = (rng.randrange(1, alg.n + 1), s)
        even[v] = even.get(v, 0) + 1
        left -= s
    for _ in range(rng.randrange(0, max_u0 + 1)):
        v = (rng.randrange(1, alg.n + 1), 0)
        even[v] = even.get(v, 0) + 1
    return (tuple(sorted(even.items())), tuple(sorted(odd)))


def random_expr(alg, rng, std, sup, terms=3, g=0):
    out = alg.zero()
    for _ in range(terms):
        m = random_monomial(alg, rng, std, sup)
        if m is None:
            continue
        out = out + alg.monomial(m, Fraction(rng.randrange(-6, 7) or 1), g)
    return out


@pytest.fixture(scope="session")
def rng():
    return random.Random(20260808)


@pytest.fixture(scope="session")
def table16():
    return gen_trivial(2, 16, 12)


@pytest.fixture(scope="session")
def conf():
    return ConformalData.trivial()


@pytest.fixture(scope="session")
def sd16(table16):
    return SeriesData(table16)


@pytest.fixture(scope="session")
def pipe1(table16, sd16, conf):
    """Everything at dispersion order one: brackets, transform, Hamiltonians."""
    alg = JetAlgebra(1, 1, laurent_min=-60)
    jd = JetData(sd16, alg)
    A, W, Winv = first_bracket(jd, 1)
    B, K, W, Winv = second_bracket(jd, conf, 1, W, Winv)
    Bt = tilde_bracket(B, A, table16.eta, table16.eta_inv)
    rt, M = tilde_R_M(table16, conf)
    h_w = {
        (1, d): hamiltonian_density_w(jd, 1, d, Winv, gmax=1) for d in range(-1, 6)
    }
    return {
        "alg": alg,
        "jd": jd,
        "A": A,
        "B": B,
        "K": K,
        "Bt": Bt,
        "W": W,
        "Winv": Winv,
        "rt": rt,
        "M": M,
        "h_w": h_w,
    }


@pytest.fixture(scope="session")
def decorations(sd16, conf):
    from jetpoisson.tautorel import Decorations

    return Decorations(sd16, conf)


@pytest.fixture(scope="session")
def pipe2(table16, sd16, conf):
    """The dispersion-order-two pipeline (the long route)."""
    alg = JetAlgebra(1, 2, laurent_min=-60)
    jd = JetData(sd16, alg)
    A, W, Winv = first_bracket(jd, 2)
    B, K, W, Winv = second_bracket(jd, conf, 2, W, Winv)
    Bt = tilde_bracket(B, A, table16.eta, table16.eta_inv)
    return {"alg": alg, "jd": jd, "A": A, "B": B, "K": K, "Bt": Bt, "W": W, "Winv": Winv}


@pytest.fixture(scope="session")
def a2():
    table = CorrelatorTable.read(str(FIXTURES / "a2_genus0.tab"))
    import json

    with open(FIXTURES / "a2_conformal.json") as fh:
        c = ConformalData.from_json(json.load(fh))
    return table, c
