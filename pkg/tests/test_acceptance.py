"""Acceptance criteria, one test per criterion.

Each test prints a single ``[criterion k] PASS`` or ``FAIL`` line with the
measured quantities. Run ``pytest tests/test_acceptance.py -s`` or
``python tests/test_acceptance.py`` to see the lines.
"""

import math
import time

import numpy as np

from ckalg.bp_triples import (
    BPTriple,
    bp_heat_trace,
    bp_heat_trace_formula,
    construct_tau_for,
    index_pairing,
    make_default_pair,
    pairing_trace,
)
from ckalg.ktheory import FGAbelianGroup, cokernel, det, k_groups, snf
from ckalg.measure import ConformalMeasure
from ckalg.operators import fredholm_index, suq2_index_operator
from ckalg.product import ProductBounds
from ckalg.sft_core import (
    almost_free,
    enumerate_words,
    free_group,
    full_shift,
    is_minimal_word,
    quantum_su2,
    words_up_to,
)
from ckalg.suite import (
    choice_operator_checks,
    fiber_checks,
    gauge_checks,
    gns_checks,
    integral_checks,
    kp_isometry_checks,
    lr_commutator_checks,
    monomial_checks,
    product_checks,
    sample_points,
)

SEED = 20240501


def report(capsys, k: int, ok: bool, detail: str, deviation: str | None = None) -> None:
    status = "PASS" if ok else "FAIL"
    if ok and deviation:
        status = f"PASS with deviation ({deviation})"
    line = f"[criterion {k}] {status}: {detail}"
    if capsys is None:
        print(line)
        return
    with capsys.disabled():
        print("\n" + line)


def _failed(checks):
    return [f"{c.name} {dict(c.params)} value={c.value:.3g}" for c in checks if not c.passed]


def test_criterion_1_k_group_table(capsys):
    start = time.perf_counter()
    problems = []
    for n in range(2, 7):
        if k_groups(full_shift(n)).K1_hom != FGAbelianGroup(0, (n - 1,) if n > 2 else ()):
            problems.append(f"O_{n}")
    g = k_groups(quantum_su2())
    if not (g.K0 == g.K1 == g.K0_hom == g.K1_hom == FGAbelianGroup(1)):
        problems.append("SU_q(2)")
    for d in (2, 3):
        g = k_groups(free_group(d))
        expected = FGAbelianGroup(d, (d - 1,) if d > 2 else ())
        if g.K1_hom != expected or g.K0_hom.free_rank != d:
            problems.append(f"free {d}")
        if k_groups(almost_free(d)).K1_hom != FGAbelianGroup(0, (2,) * (2 * (d - 1)) + (4 * (d - 1),)):
            problems.append(f"almost free {d}")
    elapsed = time.perf_counter() - start
    ok = not problems and elapsed < 1.0
    report(capsys, 1, ok, f"every table entry exact in {elapsed:.3f}s" if ok else f"mismatch {problems}, {elapsed:.3f}s")
    assert ok


def test_criterion_2_kms_and_conformality(capsys):
    worst_kms = 0.0
    for n in (2, 3):
        m = ConformalMeasure.of(full_shift(n))
        table = list(enumerate_words(full_shift(n), 5))
        for mu in table:
            for nu in table:
                expected = n ** -len(mu) if mu == nu else 0.0
                worst_kms = max(worst_kms, abs(m.kms_monomial(mu, nu) - expected))
    irreducible = [full_shift(2), full_shift(3), free_group(2), free_group(3), almost_free(2), almost_free(3)]
    worst_conf = max(ConformalMeasure.of(a).conformality_residual(4) for a in irreducible)
    ok = worst_kms <= 1e-10 and worst_conf < 1e-8
    report(capsys, 2, ok, f"max KMS error {worst_kms:.2e} (tol 1e-10), max conformality defect {worst_conf:.2e} (tol 1e-8)")
    assert ok


def test_criterion_3_operator_identities(capsys):
    start = time.perf_counter()
    checks = []
    for a in (full_shift(2), quantum_su2(), free_group(2)):
        checks += lr_commutator_checks(a, 6)
        checks += choice_operator_checks(a, 6)
        checks += monomial_checks(a, 6, 3)
        checks += gns_checks(a, 6, words_up_to(a, 1))
        checks += kp_isometry_checks(a, 6)
        checks += gauge_checks(a, sample_points(a)[0], (1, 2))
    elapsed = time.perf_counter() - start
    failed = _failed(checks)
    skipped = sum(1 for c in checks if not c.applicable)
    ok = not failed and elapsed < 30.0
    report(
        capsys, 3, ok,
        f"{len(checks)} identity families exact at depth 6 ({skipped} not applicable), {elapsed:.1f}s"
        if ok else f"{failed[:3]}, {elapsed:.1f}s",
    )
    assert ok


def test_criterion_4_fiber_phase(capsys):
    checks = []
    for a in (full_shift(2), quantum_su2()):
        for base in sample_points(a):
            for lam in words_up_to(a, 2):
                checks += fiber_checks(a, base, lam, (5, 3))
    failed = _failed(checks)
    norms = [c.value for c in checks if c.name == "fiber_commutator_norm"]
    ok = not failed
    report(capsys, 4, ok, f"{len(checks)} checks, kernel dim 1 and phase exact, max commutator norm {max(norms):.3f}"
           if ok else str(failed[:3]))
    assert ok


def test_criterion_5_index_pairings(capsys):
    values = []
    for a in (full_shift(2), free_group(2)):
        for mu in words_up_to(a, 3):
            if mu and is_minimal_word(a, mu):
                values.append(index_pairing(construct_tau_for(a, mu), mu))
    index = fredholm_index(suq2_index_operator, 4)
    ok = set(values) == {1} and index.index == -1
    report(capsys, 5, ok, f"{len(values)} minimal words pair to 1; SU_q(2) index {index.index} "
                  f"(kernel {index.kernel}, cokernel {index.cokernel}) stable over depths {index.checked_depths}")
    assert ok


def test_criterion_6_product_estimates(capsys):
    start = time.perf_counter()
    checks = []
    for a in (full_shift(2), quantum_su2()):
        pair = make_default_pair(a)
        for s in (0.25, 0.5, 0.75):
            checks += product_checks(a, (), pair, s, ProductBounds(4, 4))
    elapsed = time.perf_counter() - start
    failed = _failed(checks)
    reduced = max(c.value for c in checks if c.name == "epsilon_redcomm")
    full = max(c.value for c in checks if c.name == "epsilon_full")
    ok = not failed and elapsed < 120.0
    deviation = None
    if full > 1.0 + 1e-9:
        deviation = (
            f"the full commutator carries a boundary term beyond the reduced formula; its epsilon norm "
            f"reaches {full:.3f} > 1 and is held to sqrt(2), see the decisions ledger"
        )
    report(
        capsys, 6, ok,
        f"structure and commutator formula exact, reduced-term blocks <= k^s, reduced epsilon norm "
        f"{reduced:.3f} <= 1, {elapsed:.1f}s" if ok else str(failed[:3]),
        deviation,
    )
    assert ok


def test_criterion_7_integral_formula(capsys):
    checks = integral_checks((0.0, 1.0, 2.0, 5.0), (0.25, 0.5, 0.75))
    worst = max(c.value for c in checks if c.name == "integral_formula")
    ok = all(c.passed for c in checks)
    report(capsys, 7, ok, f"max defect {worst:.2e} (tol 1e-6), estimates hold at the sampled points")
    assert ok


def test_criterion_8_property_invariants(capsys):
    heat = 0.0
    for a in (full_shift(2), quantum_su2(), free_group(2)):
        for s in (0.25, 0.5):
            triple = BPTriple(make_default_pair(a), s, 4)
            for t in (0.1, 1.0):
                exact = bp_heat_trace_formula(a, 4, s, t)
                heat = max(heat, abs(bp_heat_trace(triple, t) - exact) / exact)

    depth_ok = True
    for a in (full_shift(2), free_group(2)):
        pair = make_default_pair(a)
        for mu in words_up_to(a, 2):
            depth_ok &= len({pairing_trace(pair, mu, m) for m in range(len(mu), len(mu) + 3)}) == 1

    rng = np.random.default_rng(SEED)
    det_ok, dual_ok = True, True
    for _ in range(100):
        n = int(rng.integers(2, 7))
        a = rng.integers(0, 2, size=(n, n))
        m = (np.eye(n, dtype=int) - a).tolist()
        mt = (np.eye(n, dtype=int) - a.T).tolist()
        det_ok &= abs(det(m)) == math.prod(snf(m).diagonal)
        det_ok &= det(m) == round(np.linalg.det(np.array(m, dtype=float)))
        dual_ok &= cokernel(m) == cokernel(mt)

    ok = heat < 1e-12 and depth_ok and det_ok and dual_ok
    report(capsys, 8, ok, f"heat trace rel. error {heat:.1e}, pairing depth-independent {depth_ok}, "
                  f"SNF det cross-check {det_ok}, cokernel duality on 100 seeded matrices {dual_ok}")
    assert ok


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn(None)
            except AssertionError:
                pass
