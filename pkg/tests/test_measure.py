import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ckalg.measure import ConformalMeasure, DegenerateGNS, perron
from ckalg.sft_core import almost_free, enumerate_words, free_group, full_shift, quantum_su2, validate_matrix
from strategies import matrices, words

SKEW = validate_matrix([[1, 1, 0], [0, 0, 1], [1, 1, 1]])


def _dense_perron(a):
    vals, vecs = np.linalg.eig(a.array.astype(float))
    k = int(np.argmax(vals.real))
    v = np.abs(vecs[:, k].real)
    return float(vals[k].real), v / v.sum()


@pytest.mark.parametrize("n", [2, 3, 4])
def test_perron_full_shift(n):
    p = perron(full_shift(n))
    assert p.lam == pytest.approx(n, abs=1e-12)
    assert np.allclose(p.v, 1.0 / n, atol=1e-12)
    assert not p.reducible


def test_perron_suq2_is_flagged_reducible():
    p = perron(quantum_su2())
    assert p.reducible
    assert p.lam == pytest.approx(1.0)
    assert p.v == pytest.approx((1.0, 0.0))


def test_perron_free_group_uniform():
    p = perron(free_group(2))
    assert p.lam == pytest.approx(3.0, abs=1e-12)
    assert np.allclose(p.v, 0.25, atol=1e-12)


def test_perron_nonuniform_against_dense_solver():
    lam, v = _dense_perron(SKEW)
    p = perron(SKEW)
    assert p.lam == pytest.approx(lam, abs=1e-10)
    assert np.allclose(p.v, v, atol=1e-10)
    assert len(set(np.round(p.v, 6))) > 1


def test_cylinder_volumes():
    m = ConformalMeasure.of(full_shift(2))
    assert m.vol((0, 1)) == pytest.approx(0.25)
    assert m.vol(()) == 1.0


def test_volumes_follow_conformality_recursion():
    # oracle: depth-one values from the dense eigenvector, then vol(C_{i mu}) = vol(C_mu) / lambda
    lam, v = _dense_perron(SKEW)
    m = ConformalMeasure.of(SKEW)
    for mu in enumerate_words(SKEW, 4):
        if not mu:
            continue
        expected = v[mu[-1]] / lam ** (len(mu) - 1)
        assert m.vol(mu) == pytest.approx(expected, abs=1e-10)


def test_conformality_residuals():
    assert ConformalMeasure.of(full_shift(2)).conformality_residual(3) < 1e-10
    assert ConformalMeasure.of(almost_free(2)).conformality_residual(3) < 1e-10
    # reducible case: the defect is reported, and for this matrix it happens to vanish
    assert ConformalMeasure.of(quantum_su2()).conformality_residual(3) == pytest.approx(0.0, abs=1e-12)


def test_kms_examples():
    m = ConformalMeasure.of(full_shift(2))
    assert m.kms_monomial((0, 1), (0, 1)) == pytest.approx(0.25)
    assert m.kms_monomial((0,), (1,)) == 0.0
    assert m.kms_monomial((), ()) == 1.0


def test_c_constants():
    assert ConformalMeasure.of(full_shift(2)).c_constant((0, 1)) == pytest.approx(1.0)
    assert all(ConformalMeasure.of(full_shift(3)).c_constant((i,)) == pytest.approx(1.0) for i in range(3))


def test_c_constant_degenerate_for_suq2():
    m = ConformalMeasure.of(quantum_su2())
    assert m.c_constant((0,)) == pytest.approx(1.0)
    with pytest.raises(DegenerateGNS):
        m.c_constant((1,))


def test_modular_function():
    assert ConformalMeasure.of(full_shift(2)).modular_function(0) == 1.0
    assert ConformalMeasure.of(full_shift(2)).modular_function(1) == pytest.approx(0.5)
    assert ConformalMeasure.of(full_shift(3)).modular_function(-2) == pytest.approx(9.0)


def test_report_has_expected_keys():
    r = ConformalMeasure.of(full_shift(2)).report(3)
    assert set(r) >= {"lambda", "delta", "v", "residual", "conformality_defect"}
    assert r["delta"] == pytest.approx(math.log(2))


@given(matrices(max_n=4), st.integers(1, 4))
def test_mass_is_preserved_on_each_level(a, length):
    m = ConformalMeasure.of(a)
    total = sum(m.vol(w) for w in enumerate_words(a, length).of_length(length))
    assert total == pytest.approx(1.0, abs=1e-9)


@given(matrices(max_n=4))
def test_conformality_defect_small_for_irreducible(a):
    assert ConformalMeasure.of(a).conformality_residual(3) < 1e-8


@given(st.data())
def test_kms_is_a_state_on_diagonal_monomials(data):
    a = data.draw(matrices())
    mu = data.draw(words(a, 0, 4))
    value = ConformalMeasure.of(a).kms_monomial(mu, mu)
    assert 0.0 < value <= 1.0 + 1e-12


@given(st.data())
def test_c_constant_matches_follower_volume(data):
    # <S_mu, S_mu> = c_mu^{-2} = sum over followers j of the last letter of vol(C_j)
    a = data.draw(matrices())
    mu = data.draw(words(a, 1, 4))
    m = ConformalMeasure.of(a)
    expected = sum(m.vol((j,)) for j in a.followers[mu[-1]])
    assert m.c_constant(mu) ** -2 == pytest.approx(expected, rel=1e-10)
    if len(mu) > 1:
        assert m.c_constant(mu) == pytest.approx(m.c_constant(mu[1:]))
