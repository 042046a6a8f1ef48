import math

import numpy as np
import pytest
import sympy
from hypothesis import given, strategies as st
from sympy.matrices.normalforms import smith_normal_form

from ckalg.ktheory import (
    INFINITE,
    ContractNotApplicable,
    FGAbelianGroup,
    charpoly,
    cokernel,
    core_determinant,
    det,
    duality_image,
    fixed_point_descriptors,
    k_groups,
    kernel,
    matmul,
    one_minus,
    pv_consistency,
    snf,
    unit_class_order,
)
from ckalg.sft_core import almost_free, free_group, full_shift, quantum_su2
from strategies import any_matrices

int_matrices = st.integers(1, 4).flatmap(
    lambda r: st.integers(1, 4).flatmap(
        lambda c: st.lists(st.lists(st.integers(-6, 6), min_size=c, max_size=c), min_size=r, max_size=r)
    )
)


def _sympy_factors(m):
    d = smith_normal_form(sympy.Matrix(m), domain=sympy.ZZ)
    return sorted(abs(int(d[i, i])) for i in range(min(d.shape)))


def _is_unimodular(m):
    return abs(det(m)) == 1


@pytest.mark.parametrize("n", range(2, 7))
def test_khomology_of_full_shifts(n):
    assert k_groups(full_shift(n)).K1_hom == FGAbelianGroup(0, (n - 1,) if n > 2 else ())


def test_suq2_groups_are_all_Z():
    g = k_groups(quantum_su2())
    assert g.K0 == g.K1 == g.K0_hom == g.K1_hom == FGAbelianGroup(1)


@pytest.mark.parametrize("d", [2, 3])
def test_free_group_matrix(d):
    g = k_groups(free_group(d))
    expected = FGAbelianGroup(d, (d - 1,) if d > 2 else ())
    assert g.K1_hom == expected
    assert g.K0_hom == FGAbelianGroup(d)


@pytest.mark.parametrize("d", [2, 3])
def test_almost_free_matrix(d):
    g = k_groups(almost_free(d))
    assert g.K1_hom == FGAbelianGroup(0, (2,) * (2 * (d - 1)) + (4 * (d - 1),))
    assert g.K0_hom.is_trivial()


def test_group_display():
    assert str(FGAbelianGroup(2, (2, 4))) == "Z^2 + Z/2 + Z/4"
    assert str(FGAbelianGroup(0)) == "0"
    assert FGAbelianGroup(1, (3,)).to_json() == {"free_rank": 1, "torsion": [3]}


def test_group_rejects_bad_chain():
    with pytest.raises(ValueError):
        FGAbelianGroup(0, (2, 3))


def test_unit_class_orders():
    assert unit_class_order(full_shift(4)) == 3
    assert unit_class_order(almost_free(2)) == 2
    assert unit_class_order(quantum_su2()) == INFINITE


def test_duality_image_validates_length():
    with pytest.raises(ValueError):
        duality_image(full_shift(2), [1, 1, 1])


def test_duality_image_of_image_is_zero():
    # columns of 1 - A vanish in the cokernel
    a = almost_free(2)
    m = one_minus(a)
    for j in range(a.n):
        assert duality_image(a, [row[j] for row in m]).is_zero()


def test_det_and_charpoly_examples():
    assert det([[2, 1], [1, 1]]) == 1
    assert det(one_minus(full_shift(3))) == -2
    assert charpoly([[1, 1], [0, 1]]) == [1, -2, 1]
    assert core_determinant([[1, 1], [1, 1]]) == 2


def test_pv_consistency_full_shift():
    r = pv_consistency(full_shift(3))
    assert r.euler_consistent and r.torsion_matches_det and r.localization_consistent
    assert r.exact is None
    with pytest.raises(ContractNotApplicable):
        pv_consistency(full_shift(3), require_exact=True)


def test_pv_consistency_exact_for_invertible_matrix():
    r = pv_consistency(quantum_su2(), require_exact=True)
    assert r.invertible and r.exact


def test_fixed_point_descriptors_full_shift():
    colim, lim = fixed_point_descriptors(full_shift(2), 3)
    assert colim.ranks == (1, 1, 1) and colim.stabilized
    assert [g.invariant_factors for g in colim.stage_groups] == [(), (2,), (4,)]
    with pytest.raises(ValueError):
        fixed_point_descriptors(full_shift(2), 0)


@given(int_matrices)
def test_snf_matches_sympy(m):
    assert sorted(abs(d) for d in snf(m).diagonal) == _sympy_factors(m)


@given(int_matrices)
def test_snf_certificate(m):
    res = snf(m)
    assert [list(r) for r in matmul(matmul(res.U, m), res.V)] == [list(r) for r in res.D]
    assert _is_unimodular(res.U) and _is_unimodular(res.V)
    diag = [d for d in res.diagonal if d]
    assert all(d > 0 for d in diag)
    assert all(b % a == 0 for a, b in zip(diag, diag[1:]))


@given(st.integers(1, 4).flatmap(lambda n: st.lists(st.lists(st.integers(-5, 5), min_size=n, max_size=n), min_size=n, max_size=n)))
def test_det_matches_numpy_and_snf(m):
    expected = round(np.linalg.det(np.array(m, dtype=float)))
    assert det(m) == expected
    assert abs(det(m)) == math.prod(snf(m).diagonal)


@given(any_matrices(max_n=5))
def test_cokernel_duality_invariance(a):
    assert cokernel(one_minus(a)) == cokernel(one_minus(a, transpose=True))
    assert kernel(one_minus(a)) == kernel(one_minus(a, transpose=True))


@given(any_matrices(max_n=5))
def test_torsion_order_is_det_when_nonsingular(a):
    g = k_groups(a)
    d = det(one_minus(a))
    if d:
        assert g.K1_hom.free_rank == 0 and g.K1_hom.torsion_order == abs(d)
    else:
        assert g.K1_hom.free_rank > 0
