import pytest
from hypothesis import given, strategies as st

from ckalg.groupoid import (
    UNIT,
    FiberElement,
    GroupoidElement,
    InvalidElement,
    NotComposable,
    a_lambda,
    a_lambda_bound,
    a_lambda_direct,
    a_lambda_table,
    enumerate_fiber,
    fiber_csv,
    fiber_from_element,
    fiber_left_multiply,
    fiber_left_multiply_groupoid,
    fiber_psi,
    in_Y_lambda,
    kappa,
    psi_lambda,
)
from ckalg.sft_core import Point, constant_point, full_shift, quantum_su2, almost_free, free_group
from strategies import matrices, points, words

ONE, TWO = constant_point(0), constant_point(1)
ONE_TWO = Point((0,), (1,))  # 1 2 2 2 ...


def test_compose_with_inverse_is_unit():
    xi = GroupoidElement(ONE_TWO, 1, TWO)
    unit = xi.compose(xi.invert())
    assert unit.is_unit() and unit == GroupoidElement(ONE_TWO, 0, ONE_TWO)


def test_compose_example():
    xi = GroupoidElement(ONE_TWO, 1, TWO)
    eta = GroupoidElement(TWO, -1, ONE_TWO)
    assert xi.compose(eta) == GroupoidElement(ONE_TWO, 0, ONE_TWO)


def test_compose_rejects_mismatch():
    with pytest.raises(NotComposable):
        GroupoidElement(ONE, 0, ONE).compose(GroupoidElement(TWO, 0, TWO))


def test_invalid_element_rejected():
    with pytest.raises(InvalidElement):
        GroupoidElement(ONE, 0, TWO)


def test_kappa_examples():
    assert kappa(GroupoidElement(ONE, 0, ONE)) == 0
    assert kappa(GroupoidElement(TWO, -1, ONE_TWO)) == 1
    assert kappa(GroupoidElement(ONE_TWO, 1, TWO)) == 0


def test_in_Y_examples():
    unit = GroupoidElement(ONE, 0, ONE)
    assert in_Y_lambda(unit, ())
    assert not in_Y_lambda(unit, (0,))
    assert in_Y_lambda(GroupoidElement(ONE_TWO, 2, TWO), (0, 1))


def test_psi_examples():
    assert all(psi_lambda(GroupoidElement(ONE, 0, ONE), lam) == 0 for lam in [(), (0,), (0, 1)])
    assert psi_lambda(GroupoidElement(TWO, -1, ONE_TWO), ()) == -2
    assert psi_lambda(GroupoidElement(ONE, 2, ONE), ()) == 2


def test_a_lambda_on_units_is_two():
    # psi(unit) = 0 and the shifted element has cocycle -1 and depth 1, so psi = -2
    for lam in [(), (0,), (0, 1)]:
        assert a_lambda(GroupoidElement(ONE, 0, ONE), lam) == 2


def test_a_lambda_nonpositive_cocycle_on_the_diagonal():
    # n <= 0 with n + kappa = 0 and kappa > 0
    xi = GroupoidElement(TWO, -1, ONE_TWO)
    assert xi.n + xi.kappa == 0
    assert a_lambda(xi, ()) == 2


def test_a_lambda_bound_values():
    assert a_lambda_bound(()) == 2
    assert a_lambda_bound((0,)) == 2
    assert a_lambda_bound((0, 1)) == 3


def test_enumerate_fiber_o2():
    got = enumerate_fiber(full_shift(2), ONE, 1, 1)
    assert got == [UNIT, FiberElement(0, (0,)), FiberElement(0, (1,)), FiberElement(1, ()), FiberElement(1, (1,))]


def test_enumerate_fiber_trivial_bounds():
    assert enumerate_fiber(full_shift(3), Point((2,), (0, 1)), 0, 0) == [UNIT]


def test_enumerate_fiber_suq2_junction():
    assert len(enumerate_fiber(quantum_su2(), TWO, 2, 0)) == 6


def test_fiber_csv_header():
    text = fiber_csv(enumerate_fiber(full_shift(2), ONE, 1, 0), ONE, ())
    assert text.splitlines()[0] == "prefix,cut,n,kappa,psi_lambda"
    assert len(text.splitlines()) == 4


MATRICES = [full_shift(2), quantum_su2(), free_group(2), almost_free(2)]


@pytest.mark.parametrize("a", MATRICES, ids=["o2", "suq2", "free2", "ad2"])
def test_a_lambda_table_exhaustive(a):
    bases = [p for p in (ONE, TWO, ONE_TWO, Point((), (0, 1)), Point((), (0, 2))) if p.is_admissible(a)]
    lams = [(), (0,), (a.followers[0][-1],), (0, a.followers[0][-1])]
    for base in bases:
        for e in enumerate_fiber(a, base, 3, 3):
            xi = e.to_element(base)
            for lam in lams:
                assert a_lambda_direct(xi, lam) == a_lambda_table(xi, lam)
                assert abs(a_lambda_direct(xi, lam)) <= a_lambda_bound(lam)


@given(st.data())
def test_fiber_psi_matches_groupoid_psi(data):
    a = data.draw(matrices(max_n=3))
    base = data.draw(points(a))
    lam = data.draw(words(a, 0, 2))
    for e in enumerate_fiber(a, base, 2, 2):
        assert fiber_psi(e, lam) == psi_lambda(e.to_element(base), lam)


@given(st.data())
def test_fiber_is_collision_free(data):
    a = data.draw(matrices(max_n=3))
    base = data.draw(points(a))
    elements = enumerate_fiber(a, base, 3, 3)
    images = {(e.to_element(base).x, e.n) for e in elements}
    assert len(images) == len(elements)
    assert all(fiber_from_element(e.to_element(base)) == e for e in elements)


@given(st.data())
def test_left_multiplication_rules_match_point_arithmetic(data):
    a = data.draw(matrices(max_n=3))
    base = data.draw(points(a))
    i = data.draw(st.integers(0, a.n - 1))
    for e in enumerate_fiber(a, base, 2, 3):
        assert fiber_left_multiply(a, base, e, i) == fiber_left_multiply_groupoid(a, base, e, i)


@given(st.data())
def test_cocycle_is_additive_and_depth_filtered(data):
    a = data.draw(matrices(max_n=3))
    base = data.draw(points(a))
    fiber = enumerate_fiber(a, base, 2, 2)
    e1, e2 = data.draw(st.sampled_from(fiber)), data.draw(st.sampled_from(fiber))
    xi, eta = e1.to_element(base), e2.to_element(base).invert()
    product = xi.compose(eta)
    assert product.cocycle == xi.cocycle + eta.cocycle
    assert xi.invert().kappa == xi.kappa + xi.cocycle


@given(st.data())
def test_psi_positive_exactly_on_Y_with_positive_cocycle(data):
    a = data.draw(matrices(max_n=3))
    base = data.draw(points(a))
    lam = data.draw(words(a, 0, 2))
    for e in enumerate_fiber(a, base, 3, 2):
        xi = e.to_element(base)
        assert (psi_lambda(xi, lam) > 0) == (xi.in_Y(lam) and xi.n > 0)
