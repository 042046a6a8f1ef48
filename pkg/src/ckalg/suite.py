"""Named identity checks shared by the ``ck verify`` command and the test suite.

Each check reports the measured defect or norm, the bound it is held to,
and, on failure, the label of a basis vector where the largest defect sits.
Checks that do not apply to a matrix are reported with ``applicable=False``
and count as passed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .bp_triples import ChoicePair, make_default_pair
from .groupoid import (
    CaseTableMismatch,
    UNIT,
    a_lambda,
    a_lambda_bound,
    enumerate_fiber,
)
from .measure import ConformalMeasure, DegenerateGNS
from .operators import (
    FLOAT_TOL,
    SparseOperator,
    build_fiber_rep,
    build_L,
    build_R,
    build_s_it,
    commutator_norm_bound_check,
    empty_projection,
    gauge_module_checks,
    identity,
    kp_checks,
    monomial_product_check,
    operator_from_images,
    w_lambda_checks,
    word_basis,
    zero,
)
from .product import (
    ProductBounds,
    build_product,
    chi_structure_check,
    connection_commutator_report,
    epsilon_bound_check,
    integral_formula_check,
    symmetry_defect,
)
from .sft_core import (
    AdjacencyMatrix,
    Point,
    Word,
    constant_point,
    enumerate_words,
    follower_orbit_point,
    format_word,
    words_up_to,
)

NORM_TOL = 1e-9


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    bound: float
    passed: bool
    witness: str | None = None
    applicable: bool = True
    params: Mapping = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "value": self.value,
            "bound": self.bound,
            "passed": self.passed,
            "applicable": self.applicable,
            "params": dict(self.params),
        }
        if self.witness is not None:
            out["witness"] = self.witness
        return out


def _label(label) -> str | None:
    if label is None:
        return None
    if isinstance(label, tuple) and all(isinstance(x, int) for x in label):
        return format_word(label) or "(empty)"
    return str(label)


def defect_check(name: str, actual: SparseOperator, expected: SparseOperator, bound: float = 0.0, **params) -> CheckResult:
    value, where = actual.interior_witness(expected)
    passed = value <= bound
    return CheckResult(name, value, bound, passed, None if passed else _label(where), True, params)


def value_check(name: str, value: float, bound: float, **params) -> CheckResult:
    return CheckResult(name, float(value), float(bound), float(value) <= bound, None, True, params)


def skipped(name: str, reason: str, **params) -> CheckResult:
    return CheckResult(name, 0.0, 0.0, True, reason, False, params)


# ---------------------------------------------------------------- word space


def lr_commutator_checks(a: AdjacencyMatrix, depth: int) -> list[CheckResult]:
    """[L_i, R_j] = 0 and [L_i^*, R_j] = delta_ij P_empty - (1 - A_ij) |delta_j><delta_i|.

    The rank-one term comes from R_j acting on the empty word without an
    admissibility constraint; it vanishes for full shifts.
    """
    basis = word_basis(a, depth)
    L = [build_L(a, basis, i) for i in range(a.n)]
    R = [build_R(a, basis, j) for j in range(a.n)]
    p_empty = empty_projection(basis)
    out = []
    for i in range(a.n):
        for j in range(a.n):
            out.append(defect_check("L_R_commute", L[i] @ R[j], R[j] @ L[i], i=i + 1, j=j + 1, depth=depth))

            def rank_one(mu, i=i, j=j):
                if mu == (i,) and not a.allowed(i, j):
                    yield (j,), -1.0

            rhs = operator_from_images(basis, basis, rank_one, 0)
            if i == j:
                rhs = rhs + p_empty
            comm = L[i].H @ R[j] - R[j] @ L[i].H
            out.append(defect_check("L_adjoint_R_commutator", comm, rhs, i=i + 1, j=j + 1, depth=depth))
    return out


def choice_operator_checks(a: AdjacencyMatrix, depth: int, pair: ChoicePair | None = None) -> list[CheckResult]:
    """The operators pi_t(chi_{C_i}) V_sigma: equality with L_i and the generator relations."""
    pair = make_default_pair(a) if pair is None else pair
    basis = word_basis(a, depth)
    p_empty = empty_projection(basis)
    out = []
    for name, choice in (("plus", pair.plus), ("minus", pair.minus)):
        s = [build_s_it(a, basis, i, choice) for i in range(a.n)]
        for i in range(a.n):
            out.append(defect_check("s_equals_L", s[i], build_L(a, basis, i), choice=name, i=i + 1, depth=depth))
        for i in range(a.n):
            source = p_empty
            for j in a.followers[i]:
                source = source + s[j] @ s[j].H
            for k in range(a.n):
                rhs = source if i == k else zero(basis)
                out.append(
                    defect_check("s_relations", s[i].H @ s[k], rhs, choice=name, i=i + 1, k=k + 1, depth=depth)
                )
        total = zero(basis)
        for i in range(a.n):
            total = total + s[i] @ s[i].H
        out.append(defect_check("s_range_sum", total, identity(basis) - p_empty, choice=name, depth=depth))
    return out


def monomial_checks(a: AdjacencyMatrix, depth: int, max_length: int = 3) -> list[CheckResult]:
    basis = word_basis(a, depth)
    words = words_up_to(a, max_length)
    worst, where, count = 0.0, None, 0
    for nu in words:
        for gamma in words:
            result = monomial_product_check(a, basis, nu, gamma)
            count += 1
            if result.defect > worst:
                worst, where = result.defect, f"nu={format_word(nu)}, gamma={format_word(gamma)} -> {result}"
    return [CheckResult("monomial_classification", worst, 0.0, worst == 0.0, where, True, {"pairs": count, "depth": depth})]


def _unit_constants(m: ConformalMeasure) -> bool:
    return all(abs(m.c_constant((i,)) - 1.0) <= FLOAT_TOL for i in range(m.matrix.n))


def gns_checks(a: AdjacencyMatrix, depth: int, lams: Iterable[Sequence[int]]) -> list[CheckResult]:
    """W_lambda^* W_lambda = P_lambda and W^* pi(S_i) W = L_i P_lambda, with measure-weighted entries."""
    try:
        m = ConformalMeasure.of(a)
        unit_constants = _unit_constants(m)
    except DegenerateGNS as exc:
        return [skipped("W_lambda", f"degenerate measure: {exc}")]
    out = []
    for lam in lams:
        lam = tuple(lam)
        if not lam and not unit_constants:
            out.append(skipped("W_lambda", "lambda empty needs unit single-letter constants", **{"lambda": format_word(lam)}))
            continue
        try:
            r = w_lambda_checks(m, depth, lam)
        except DegenerateGNS as exc:
            out.append(skipped("W_lambda", f"degenerate measure: {exc}", **{"lambda": format_word(lam)}))
            continue
        worst = max((r.isometry_defect,) + r.intertwining_defects)
        out.append(value_check("W_lambda", worst, FLOAT_TOL, **{"lambda": format_word(lam), "depth": depth}))
    return out


def kp_isometry_checks(a: AdjacencyMatrix, depth: int) -> list[CheckResult]:
    """The defect identities with the diagonal Gamma; they are exact when every c_i is 1."""
    try:
        m, mt = ConformalMeasure.of(a), ConformalMeasure.of(a.transpose())
        exact = _unit_constants(m) and _unit_constants(mt)
    except DegenerateGNS as exc:
        return [skipped("KP_isometry", f"degenerate measure: {exc}")]
    r = kp_checks(a, depth)
    worst = max((r.isometry_defect,) + r.left_defects + r.right_defects)
    if not exact:
        return [
            CheckResult(
                "KP_isometry", worst, FLOAT_TOL, True, "single-letter constants differ from 1", False, {"depth": depth}
            )
        ]
    return [value_check("KP_isometry", worst, FLOAT_TOL, depth=depth)]


# ---------------------------------------------------------------- fibers


def sample_points(a: AdjacencyMatrix) -> list[Point]:
    """Admissible constant points plus the greedy orbit points of single letters."""
    points: list[Point] = []
    for j in range(a.n):
        candidates = [constant_point(j)] if a.allowed(j, j) else []
        candidates += [follower_orbit_point(a, (j,)), follower_orbit_point(a, (j,), pick_max=True)]
        for p in candidates:
            if p.is_admissible(a) and p not in points:
                points.append(p)
    return points


def a_lambda_checks(a: AdjacencyMatrix, base: Point, lam: Sequence[int], bounds: tuple[int, int]) -> CheckResult:
    mismatches, where = 0, None
    for e in enumerate_fiber(a, base, *bounds):
        try:
            a_lambda(e.to_element(base), lam)
        except CaseTableMismatch as exc:
            mismatches += 1
            where = where or str(exc)
    return CheckResult(
        "a_lambda_table", float(mismatches), 0.0, mismatches == 0, where, True,
        {"omega": str(base), "lambda": format_word(lam), "fiber_bounds": list(bounds)},
    )


def fiber_checks(a: AdjacencyMatrix, base: Point, lam: Sequence[int], bounds: tuple[int, int]) -> list[CheckResult]:
    rep = build_fiber_rep(a, base, lam, *bounds)
    params = {"omega": str(base), "lambda": format_word(lam), "fiber_bounds": list(bounds)}
    kernel = rep.kernel_labels()
    out = [
        CheckResult(
            "fiber_kernel", float(len(kernel)), 1.0, kernel == [UNIT],
            None if kernel == [UNIT] else ", ".join(map(str, kernel)), True, params,
        ),
        value_check("phase_identity", rep.phase_defect(), 0.0, **params),
    ]
    bound = a_lambda_bound(rep.lam)
    for i in range(a.n):
        norm = commutator_norm_bound_check(rep, i)
        out.append(value_check("fiber_commutator_norm", norm, bound + NORM_TOL, i=i + 1, **params))
    return out


def gauge_checks(a: AdjacencyMatrix, base: Point, degrees: Sequence[int] = (1, 2)) -> list[CheckResult]:
    out = []
    for n in degrees:
        r = gauge_module_checks(a, base, n)
        params = {"omega": str(base), "n": n, "fiber_bounds": list(r.bounds)}
        out.append(value_check("gauge_positive", r.positive_defect, FLOAT_TOL, **params))
        out.append(value_check("gauge_negative", r.negative_defect, FLOAT_TOL, **params))
    return out


# ---------------------------------------------------------------- product and integrals


def product_checks(
    a: AdjacencyMatrix, lam: Sequence[int], pair: ChoicePair, s: float, bounds: ProductBounds
) -> list[CheckResult]:
    """Structure relations, the commutator formula and the epsilon bounds.

    The reduced term of the connection commutator obeys the cut^s block bound
    and the epsilon bound 1. The full commutator also carries a boundary term,
    so its blocks are held to sqrt(2) cut^s and its epsilon norms to sqrt(2).
    """
    model = build_product(a, lam, pair, s, bounds)
    params = {"s": s, "lambda": format_word(lam), "bounds": bounds.to_json()}
    structure = chi_structure_check(model)
    out = [
        value_check("product_symmetry", symmetry_defect(model), 0.0, **params),
        value_check("chi_structure", structure.max_defect, 0.0, **params),
    ]
    for i in range(a.n):
        r = connection_commutator_report(model, i)
        e = epsilon_bound_check(model, i)
        p = dict(params, i=i + 1)
        out.append(value_check("commutator_formula", r.formula_defect, 0.0, **p))
        out.append(CheckResult("redcomm_blocks", float(not r.redcomm_blocks_ok), 0.0, r.redcomm_blocks_ok, None, True, p))
        out.append(CheckResult("full_blocks", float(not r.full_blocks_ok), 0.0, r.full_blocks_ok, None, True, p))
        out.append(value_check("support_violations", r.support_violations, 0.0, **p))
        out.append(value_check("epsilon_redcomm", max(e.redcomm_left, e.redcomm_right), 1.0 + NORM_TOL, **p))
        out.append(value_check("epsilon_full", max(e.left, e.right), math.sqrt(2) + NORM_TOL, **p))
        out.append(value_check("geometric_commutator", e.geometric, e.geometric_bound + NORM_TOL, **p))
    return out


def integral_checks(values: Sequence[float], exponents: Sequence[float], tol: float = 1e-6) -> list[CheckResult]:
    out = []
    for r in exponents:
        report = integral_formula_check(values, r)
        params = {"r": r, "values": list(values)}
        out.append(value_check("integral_formula", report.defect, tol, **params))
        out.append(CheckResult("integral_estimates", float(not report.estimates_ok), 0.0, report.estimates_ok, None, True, params))
    return out


# ---------------------------------------------------------------- the full suite


@dataclass(frozen=True)
class SuiteReport:
    checks: tuple[CheckResult, ...]
    params: Mapping

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "params": dict(self.params),
            "checks": [c.to_json() for c in self.checks],
        }


def run_suite(
    a: AdjacencyMatrix,
    depth: int = 5,
    fiber_bounds: tuple[int, int] = (5, 3),
    product_bounds: ProductBounds = ProductBounds(3, 3),
    s_values: Sequence[float] = (0.5,),
    pair: ChoicePair | None = None,
    max_lambda: int = 1,
    progress: Callable[[str], None] | None = None,
) -> SuiteReport:
    """Every identity family on one matrix at modest truncations."""
    pair = make_default_pair(a) if pair is None else pair
    lams: list[Word] = list(words_up_to(a, max_lambda))
    checks: list[CheckResult] = []

    def stage(name: str, results: Iterable[CheckResult]) -> None:
        if progress is not None:
            progress(name)
        checks.extend(results)

    stage("word space", lr_commutator_checks(a, depth))
    stage("choice operators", choice_operator_checks(a, depth, pair))
    stage("monomials", monomial_checks(a, depth, max_length=min(3, depth // 2)))
    stage("GNS", gns_checks(a, depth, lams))
    stage("KP isometry", kp_isometry_checks(a, depth))
    for base in sample_points(a):
        for lam in lams:
            stage("a_lambda", [a_lambda_checks(a, base, lam, fiber_bounds)])
            stage("fiber", fiber_checks(a, base, lam, fiber_bounds))
    stage("gauge", gauge_checks(a, sample_points(a)[0], (1,)))
    for s in s_values:
        stage("product", product_checks(a, (), pair, s, product_bounds))
    stage("integral", integral_checks((0.0, 1.0, 2.0, 5.0), (0.5,)))
    params = {
        "matrix": a.to_json(),
        "depth": depth,
        "fiber_bounds": list(fiber_bounds),
        "product_bounds": product_bounds.to_json(),
        "s": list(s_values),
        "max_lambda": max_lambda,
        "tau": pair.to_json(),
    }
    return SuiteReport(tuple(checks), params)
