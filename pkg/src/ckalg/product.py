"""The product operator on fibers over pairs of choice points.

The Hilbert space is spanned by triples (v, sheet, e): a word v, a sheet
+1 or -1, and a canonical fiber element e over the choice point tau_sheet(v).
The operator is D_geom + D_conn, where D_geom multiplies by psi_lambda(e)
times the sheet sign and D_conn swaps sheets with weight |v|^s wherever e
exists on both sheets. Everything is block diagonal in v.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy import integrate

from .bp_triples import ChoicePair
from .groupoid import (
    FiberElement,
    a_lambda_bound,
    enumerate_fiber,
    fiber_admissible,
    fiber_left_multiply,
    fiber_left_multiply_groupoid,
    fiber_psi,
)
from .ktheory import CokernelClass, duality_image
from .operators import (
    LabeledBasis,
    SparseOperator,
    diagonal,
    operator_from_images,
    operator_norm,
)
from .sft_core import (
    DEFAULT_WORD_CAP,
    EMPTY,
    AdjacencyMatrix,
    BlowupGuard,
    Point,
    Word,
    enumerate_words,
    word_key,
)


BLOCK_TOL = 1e-12


class QuadratureFailure(RuntimeError):
    pass


# ---------------------------------------------------------------- assembly


@dataclass(frozen=True)
class ProductBounds:
    max_prefix: int
    max_word: int
    max_cut: int | None = None

    @property
    def cut(self) -> int:
        return self.max_prefix if self.max_cut is None else self.max_cut

    def to_json(self) -> dict:
        return {"max_prefix": self.max_prefix, "max_cut": self.cut, "max_word": self.max_word}


@dataclass(frozen=True, eq=False)
class ProductModel:
    matrix: AdjacencyMatrix
    lam: Word
    pair: ChoicePair
    s: float
    bounds: ProductBounds
    basis: LabeledBasis
    D_geom: SparseOperator
    D_conn: SparseOperator
    S: tuple[SparseOperator, ...]

    @property
    def D(self) -> SparseOperator:
        return self.D_geom + self.D_conn

    def base(self, v: Word, sheet: int) -> Point:
        return self.pair.plus(v) if sheet > 0 else self.pair.minus(v)

    def weight(self, v: Word) -> float:
        return float(len(v)) ** self.s if v else 0.0


def product_basis(a: AdjacencyMatrix, pair: ChoicePair, bounds: ProductBounds, cap: int = DEFAULT_WORD_CAP) -> LabeledBasis:
    words = sorted(enumerate_words(a, bounds.max_word, cap), key=word_key)
    labels = []
    for v in words:
        for sheet in (1, -1):
            base = pair.plus(v) if sheet > 0 else pair.minus(v)
            for e in enumerate_fiber(a, base, bounds.max_prefix, bounds.cut, cap):
                labels.append((v, sheet, e))
            if len(labels) > cap:
                raise BlowupGuard(len(labels), cap)
    return LabeledBasis(
        tuple(labels), tuple((len(e.prefix), e.cut) for _, _, e in labels), (bounds.max_prefix, bounds.cut), "product"
    )


def _fiber_S(model_base, a: AdjacencyMatrix, basis: LabeledBasis, i: int, via_groupoid: bool) -> SparseOperator:
    step = fiber_left_multiply_groupoid if via_groupoid else fiber_left_multiply

    def image(label):
        v, sheet, e = label
        target = step(a, model_base(v, sheet), e, i)
        if target is not None:
            yield (v, sheet, target), 1.0

    return operator_from_images(basis, basis, image, 1)


def build_product(
    a: AdjacencyMatrix, lam: Sequence[int], pair: ChoicePair, s: float, bounds: ProductBounds
) -> ProductModel:
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie strictly between 0 and 1")
    lam = a.check_word(lam)
    basis = product_basis(a, pair, bounds)

    def base(v: Word, sheet: int) -> Point:
        return pair.plus(v) if sheet > 0 else pair.minus(v)

    d_geom = diagonal(basis, [fiber_psi(e, lam) * sheet for _, sheet, e in basis.labels])

    def swap(label):
        v, sheet, e = label
        w = float(len(v)) ** s if v else 0.0
        yield (v, -sheet, e), w

    d_conn = operator_from_images(basis, basis, swap, 0)
    S = tuple(_fiber_S(base, a, basis, i, via_groupoid=True) for i in range(a.n))
    return ProductModel(a, lam, pair, s, bounds, basis, d_geom, d_conn, S)


def symmetry_defect(model: ProductModel) -> float:
    d = model.D.matrix
    diff = (d - d.T).tocoo()
    return float(np.max(np.abs(diff.data))) if diff.nnz else 0.0


def d_squared_diagonal(model: ProductModel) -> np.ndarray:
    """psi^2 + |v|^{2s} [e exists on both sheets], the closed form of D^2."""
    out = []
    for v, sheet, e in model.basis.labels:
        both = model.basis.index((v, -sheet, e)) is not None
        out.append(fiber_psi(e, model.lam) ** 2 + (model.weight(v) ** 2 if both else 0.0))
    return np.array(out)


# ---------------------------------------------------------------- structure relations


@dataclass(frozen=True)
class StructureReport:
    assembly_defect: float
    positive_defect: float
    adjoint_defect: float
    null_defect: float
    multiplier_defect: float
    bounds: ProductBounds

    @property
    def max_defect(self) -> float:
        return max(self.assembly_defect, self.positive_defect, self.adjoint_defect, self.null_defect, self.multiplier_defect)

    def to_json(self) -> dict:
        return {
            "assembly_defect": self.assembly_defect,
            "positive_defect": self.positive_defect,
            "adjoint_defect": self.adjoint_defect,
            "null_defect": self.null_defect,
            "multiplier_defect": self.multiplier_defect,
            "bounds": self.bounds.to_json(),
        }


def _restricted_defect(op: SparseOperator, rhs: SparseOperator, keep) -> float:
    """Interior defect over columns whose labels satisfy ``keep``."""
    diff = op - rhs
    mask = diff.basis_in.interior_mask(diff.radius) & np.array([bool(keep(l)) for l in diff.basis_in.labels])
    block = diff.matrix[:, np.flatnonzero(mask)]
    return float(np.max(np.abs(block.data))) if block.nnz else 0.0


def chi_structure_check(model: ProductModel) -> StructureReport:
    """The generator relations on the frame vectors, against independent right-hand sides.

    Prefix vectors (n + k > 0, nonempty prefix) move to i . prefix exactly
    when A(i, first letter) is 1, and S_i^* strips a matching first letter.
    Pure cut vectors (n = -k) split into the vector with prefix i and the
    vector with one cut fewer, weighted by whether the cut letter is i. The
    range indicator of C_i on a pure cut vector equals the source function
    chi_{C_i} o shift^k.
    """
    a, basis = model.matrix, model.basis
    base = model.base
    assembly = max(
        model.S[i].interior_defect(_fiber_S(base, a, basis, i, via_groupoid=False)) for i in range(a.n)
    )
    positive = adjoint = null = multiplier = 0.0
    for i in range(a.n):

        def pos_rhs(label, i=i):
            v, sheet, e = label
            if e.prefix and a.allowed(i, e.prefix[0]):
                yield (v, sheet, FiberElement(e.cut, (i,) + e.prefix)), 1.0

        def adj_rhs(label, i=i):
            v, sheet, e = label
            if e.prefix and e.prefix[0] == i:
                yield (v, sheet, FiberElement(e.cut, e.prefix[1:])), 1.0

        def null_rhs(label, i=i):
            v, sheet, e = label
            omega = base(v, sheet)
            if e.cut > 0 and omega.letter(e.cut - 1) == i:
                yield (v, sheet, FiberElement(e.cut - 1, EMPTY)), 1.0
            if fiber_admissible(a, omega, (i,), e.cut):
                yield (v, sheet, FiberElement(e.cut, (i,))), 1.0

        S = model.S[i]
        positive = max(positive, _restricted_defect(S, operator_from_images(basis, basis, pos_rhs, 1), lambda l: l[2].prefix))
        adjoint = max(adjoint, _restricted_defect(S.H, operator_from_images(basis, basis, adj_rhs, 1), lambda l: l[2].prefix))
        null = max(null, _restricted_defect(S, operator_from_images(basis, basis, null_rhs, 1), lambda l: not l[2].prefix))

        range_side = diagonal(
            basis, [1.0 if base(v, sh).shift(e.cut).prepend(e.prefix).first() == i else 0.0 for v, sh, e in basis.labels]
        )
        source_side = diagonal(basis, [1.0 if base(v, sh).letter(e.cut) == i else 0.0 for v, sh, e in basis.labels])
        multiplier = max(multiplier, _restricted_defect(range_side, source_side, lambda l: not l[2].prefix))
    return StructureReport(assembly, positive, adjoint, null, multiplier, model.bounds)


# ---------------------------------------------------------------- connection commutator


def connection_commutator(model: ProductModel, i: int) -> SparseOperator:
    return model.D_conn @ model.S[i] - model.S[i] @ model.D_conn


def _cut_vector_terms(model: ProductModel, i: int, v: Word, sheet: int, cut: int):
    """Closed form of [D_conn, S_i] on the pure cut vector (v, sheet, (empty, cut)).

    With a = [tau_sheet(v) has letter i at position cut], b the same on the
    other sheet, and adm the canonicity of (i, cut) over each sheet, the image
    is w (a - b) (empty, cut - 1) minus the boundary term w adm_other
    (1 - adm_this) (i, cut), both on the opposite sheet.
    """
    a = model.matrix
    w = model.weight(v)
    this, other = model.base(v, sheet), model.base(v, -sheet)
    redcomm, correction = [], []
    if cut > 0:
        hit_this = int(this.letter(cut - 1) == i)
        hit_other = int(other.letter(cut - 1) == i)
        if hit_this != hit_other:
            redcomm.append(((v, -sheet, FiberElement(cut - 1, EMPTY)), w * (hit_this - hit_other)))
    adm_this = fiber_admissible(a, this, (i,), cut)
    adm_other = fiber_admissible(a, other, (i,), cut)
    if adm_other and not adm_this:
        correction.append(((v, -sheet, FiberElement(cut, (i,))), -w))
    return redcomm, correction


def commutator_formula(model: ProductModel, i: int, part: str = "full") -> SparseOperator:
    def image(label):
        v, sheet, e = label
        if e.prefix:
            return
        redcomm, correction = _cut_vector_terms(model, i, v, sheet, e.cut)
        if part in ("full", "redcomm"):
            yield from redcomm
        if part in ("full", "correction"):
            yield from correction

    return operator_from_images(model.basis, model.basis, image, 1)


@dataclass(frozen=True)
class CommutatorReport:
    i: int
    formula_defect: float
    correction_norm: float
    block_norms: tuple[tuple[int, float, float], ...]
    redcomm_block_norms: tuple[tuple[int, float, float], ...]
    support_violations: int
    bounds: ProductBounds

    @property
    def redcomm_blocks_ok(self) -> bool:
        """The reduced term obeys the cut^s block bound."""
        return all(n <= b + BLOCK_TOL for _, n, b in self.redcomm_block_norms)

    @property
    def full_blocks_ok(self) -> bool:
        """The full commutator obeys sqrt(2) cut^s: the boundary term adds one orthogonal entry per column."""
        return all(n <= math.sqrt(2) * b + BLOCK_TOL for _, n, b in self.block_norms)

    @property
    def blocks_ok(self) -> bool:
        return self.redcomm_blocks_ok and self.full_blocks_ok

    def to_json(self) -> dict:
        return {
            "i": self.i + 1,
            "formula_defect": self.formula_defect,
            "correction_norm": self.correction_norm,
            "block_norms": [list(x) for x in self.block_norms],
            "redcomm_block_norms": [list(x) for x in self.redcomm_block_norms],
            "support_violations": self.support_violations,
            "redcomm_blocks_ok": self.redcomm_blocks_ok,
            "full_blocks_ok": self.full_blocks_ok,
            "bounds": self.bounds.to_json(),
        }


def blockwise_norm(op: SparseOperator, keep=None) -> float:
    """Operator norm over interior columns (optionally filtered), one word block at a time.

    Every product operator preserves the word v, so the norm is the largest
    norm among the v blocks and no dense matrix of full size is formed.
    """
    labels = op.basis_in.labels
    mask = op.basis_in.interior_mask(op.radius)
    groups: dict = {}
    for idx, label in enumerate(labels):
        if mask[idx] and (keep is None or keep(label)):
            groups.setdefault(label[0], []).append(idx)
    row_groups: dict = {}
    for idx, label in enumerate(op.basis_out.labels):
        row_groups.setdefault(label[0], []).append(idx)
    csc = op.matrix.tocsc()
    best = 0.0
    for v, cols in groups.items():
        sub = csc[:, cols]
        if not sub.nnz:
            continue
        rows = row_groups.get(v, [])
        if sub[rows, :].nnz != sub.nnz:
            raise AssertionError("operator mixes word blocks")
        best = max(best, operator_norm(sub[rows, :].toarray()))
    return best


def _column_block_norm(op: SparseOperator, keep) -> float:
    return blockwise_norm(op, keep)


def connection_commutator_report(model: ProductModel, i: int) -> CommutatorReport:
    comm = connection_commutator(model, i)
    defect = comm.interior_defect(commutator_formula(model, i))
    correction = commutator_formula(model, i, "correction")
    redcomm = commutator_formula(model, i, "redcomm")
    max_cut = model.bounds.cut - comm.radius
    blocks, red_blocks = [], []
    for c in range(max_cut + 1):
        blocks.append((c, _column_block_norm(comm, lambda l, c=c: l[2].cut == c), float(c) ** model.s))
        # The reduced term maps cut c + 1 to cut c; the bound is indexed by the target.
        red_blocks.append(
            (c, _column_block_norm(redcomm, lambda l, c=c: l[2].cut == c + 1 and not l[2].prefix), float(c) ** model.s)
        )
    coo = comm.matrix.tocoo()
    interior = comm.basis_in.interior_mask(comm.radius)
    violations = 0
    for r, col, val in zip(coo.row, coo.col, coo.data):
        v, _, e = model.basis.labels[col]
        if interior[col] and val != 0 and len(v) > e.cut:
            violations += 1
    return CommutatorReport(
        i,
        defect,
        blockwise_norm(correction),
        tuple(blocks),
        tuple(red_blocks),
        violations,
        model.bounds,
    )


@dataclass(frozen=True)
class EpsilonReport:
    i: int
    left: float
    right: float
    geometric: float
    geometric_bound: int
    s: float
    bounds: ProductBounds
    redcomm_left: float
    redcomm_right: float

    def to_json(self) -> dict:
        return {
            "i": self.i + 1,
            "epsilon_bound_left": self.left,
            "epsilon_bound_right": self.right,
            "redcomm_epsilon_left": self.redcomm_left,
            "redcomm_epsilon_right": self.redcomm_right,
            "geometric_commutator": self.geometric,
            "geometric_bound": self.geometric_bound,
            "s": self.s,
            "bounds": self.bounds.to_json(),
        }


def epsilon_bound_check(model: ProductModel, i: int) -> EpsilonReport:
    """Norms of (1 + D^2)^{-s/2} [D_conn, S_i] and [D_conn, S_i] (1 + D^2)^{-s/2} on the interior."""
    d = model.D
    d2 = (d @ d).matrix
    closed = d_squared_diagonal(model)
    off = (d2 - _diag_sparse(closed)).tocoo()
    if off.nnz and np.max(np.abs(off.data)) > 1e-9:
        raise AssertionError("D^2 is not the expected diagonal operator")
    weight = diagonal(model.basis, (1.0 + closed) ** (-model.s / 2))
    comm = connection_commutator(model, i)
    red = commutator_formula(model, i, "redcomm")
    geo = model.D_geom @ model.S[i] - model.S[i] @ model.D_geom
    return EpsilonReport(
        i,
        blockwise_norm(weight @ comm),
        blockwise_norm(comm @ weight),
        blockwise_norm(geo),
        a_lambda_bound(model.lam),
        model.s,
        model.bounds,
        blockwise_norm(weight @ red),
        blockwise_norm(red @ weight),
    )


def _diag_sparse(values: np.ndarray) -> sp.csr_matrix:
    return sp.diags(values, format="csr")


# ---------------------------------------------------------------- rational class


@dataclass(frozen=True)
class RationalClass:
    j_plus: int
    j_minus: int
    coefficients: tuple[int, ...]
    klass: CokernelClass

    def to_json(self) -> dict:
        return {
            "j_plus": self.j_plus + 1,
            "j_minus": self.j_minus + 1,
            "coefficients": list(self.coefficients),
            "class": self.klass.to_json(),
            "is_zero": self.klass.is_zero(),
        }


def rational_class_report(a: AdjacencyMatrix, lam: Sequence[int], pair: ChoicePair) -> RationalClass:
    """The predicted class read from the first letters of tau_plus and tau_minus at the empty word."""
    lam = a.check_word(lam)
    j_plus, j_minus = pair.plus(EMPTY).first(), pair.minus(EMPTY).first()
    coeffs = [0] * a.n
    if not lam:
        coeffs[j_plus] += 1
        coeffs[j_minus] -= 1
    else:
        coeffs[lam[0]] = int(a.allowed(lam[-1], j_plus)) - int(a.allowed(lam[-1], j_minus))
    return RationalClass(j_plus, j_minus, tuple(coeffs), duality_image(a, coeffs))


# ---------------------------------------------------------------- resolvent integral


@dataclass(frozen=True)
class IntegralReport:
    defect: float
    cutoff: float
    tail: float
    estimates_ok: bool
    estimate_values: tuple[tuple[float, float, float, float], ...]

    def to_json(self) -> dict:
        return {
            "defect": self.defect,
            "cutoff": self.cutoff,
            "tail": self.tail,
            "estimates_ok": self.estimates_ok,
            "estimates": [list(x) for x in self.estimate_values],
        }


def _tail_series(c: float, r: float, cutoff: float, terms: int = 60) -> float:
    """Integral of x^{-r} / (c + x) over [cutoff, infinity) as a series in c / cutoff."""
    q = c / cutoff
    return sum((-q) ** j * cutoff ** (-r) / (r + j) for j in range(terms))


def resolvent_power_integral(c: float, r: float, quad_tol: float = 1e-10) -> tuple[float, float, float]:
    """(sin r pi / pi) * integral of x^{-r} / (c + x) over (0, infinity), for c >= 1.

    The integral is split at 1 (algebraic weight handles the endpoint
    singularity), integrated in the logarithmic variable up to a cutoff at
    least 100 c, and closed with a convergent series for the tail.
    """
    cutoff = max(100.0 * c, 1e3)
    head, err1 = integrate.quad(lambda x: 1.0 / (c + x), 0.0, 1.0, weight="alg", wvar=(-r, 0.0), epsabs=quad_tol / 10, epsrel=quad_tol / 10, limit=200)
    body, err2 = integrate.quad(lambda u: math.exp((1.0 - r) * u) / (c + math.exp(u)), 0.0, math.log(cutoff), epsabs=quad_tol / 10, epsrel=quad_tol / 10, limit=400)
    if err1 + err2 > quad_tol:
        raise QuadratureFailure(f"quadrature error estimate {err1 + err2:.3e} exceeds {quad_tol:.1e}")
    tail = _tail_series(c, r, cutoff)
    factor = math.sin(r * math.pi) / math.pi
    return factor * (head + body + tail), cutoff, factor * tail


def integral_formula_check(values: Sequence[float], r: float, quad_tol: float = 1e-10, samples: Sequence[float] = (0.0, 1.0, 10.0)) -> IntegralReport:
    """Compare (1 + D^2)^{-r} with its resolvent integral for a diagonal D, and test the three norm estimates."""
    if not 0.0 < r < 1.0:
        raise ValueError("r must lie strictly between 0 and 1")
    d = np.asarray(values, dtype=float)
    defect, cutoff, tail = 0.0, 0.0, 0.0
    for x in d:
        c = 1.0 + x * x
        val, cut, t = resolvent_power_integral(c, r, quad_tol)
        defect = max(defect, abs(val - c ** (-r)))
        cutoff, tail = max(cutoff, cut), max(tail, abs(t))
    rows, ok = [], True
    for lam in samples:
        base = 1.0 + d * d + lam
        first = float(np.max(base ** (-r)))
        second = float(np.max(np.abs(d) / np.sqrt(base)))
        third = float(np.max(d * d / base))
        rows.append((float(lam), first, second, third))
        ok &= first <= (1.0 + lam) ** (-r) + 1e-15 and second <= 1.0 and third <= 1.0
    return IntegralReport(defect, cutoff, tail, bool(ok), tuple(rows))
