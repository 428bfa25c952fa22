import pytest

from jetpoisson.tautorel import (
    check_chain_product,
    check_dimension_vanishing,
    check_lemma,
)


@pytest.fixture(scope="module")
def dec(decorations):
    return decorations


def test_barred_base_case(dec):
    assert dec.barred(1, 1, 1, 1, 0) == dec.plain(1, 1, 1, 1, 0)


def test_tilded_genus0_vanishing(dec):
    for p in range(0, 4):
        t = dec.tilded(0, 0, 1, 1, p)
        assert t.is_zero_through(t.order)


def test_tilded_equals_barred_above_base(dec):
    assert dec.tilded(1, 1, 1, 1, 2) == dec.barred(1, 1, 1, 1, 2)
    assert dec.tilded(1, 0, 1, 1, 3) == dec.barred(1, 0, 1, 1, 3)
    assert dec.tilded(0, 2, 1, 1, 2) == dec.barred(0, 2, 1, 1, 2)


def test_decoration_involution(dec, sd16):
    # adding the subtracted convolutions back recovers the plain tower
    for (g, s, p) in ((1, 1, 2), (0, 2, 3), (2, 0, 2)):
        total = dec.barred(g, s, 1, 1, p)
        for q in range(0, p):
            total = total + dec.barred(g, s, 1, 1, q) * sd16.omega(
                0, 1, 0, 1, p - q - 1
            )
        assert total == dec.plain(g, s, 1, 1, p)


def test_lemma_in_hypothesis_zero(dec):
    for lemma in (
        "vanishing-with-coefficient",
        "reduction-psi-positive-s",
        "reduction-psi",
    ):
        for g in (0, 1, 2):
            for s in (0, 1, 2):
                if lemma != "reduction-psi" and s == 0:
                    continue
                p = 2 * g + s
                r = check_lemma(dec, lemma, g, s, p)
                assert r.within_hypothesis and r.ok, (lemma, g, s, p)


def test_lemma_euler(dec):
    for g in (0, 1, 2):
        p = 2 * g + 2
        r = check_lemma(dec, "reduction-psi-euler", g, 1, p)
        assert r.within_hypothesis and r.ok


def test_vanishing_with_coefficient_empty_at_genus_zero(dec):
    r = check_lemma(dec, "vanishing-with-coefficient", 0, 1, 2)
    assert r.ok and r.series.is_zero


def test_outside_hypothesis_flagged(dec):
    r = check_lemma(dec, "reduction-psi", 1, 1, 1)
    assert not r.within_hypothesis


def test_dimension_vanishing(dec):
    assert check_dimension_vanishing(dec, 0, 0, 0).ok
    for p in (3, 4):
        r = check_dimension_vanishing(dec, 1, 0, p)
        assert r.within_hypothesis and r.ok
    r = check_dimension_vanishing(dec, 1, 0, 2)
    assert not r.within_hypothesis and not r.ok


def test_chain_product(dec):
    for s in range(0, 5):
        for r in check_chain_product(dec, s):
            assert r.ok, (s, r.name)


def test_unknown_lemma_rejected(dec):
    with pytest.raises(ValueError):
        check_lemma(dec, "no-such-lemma", 0, 0, 0)
