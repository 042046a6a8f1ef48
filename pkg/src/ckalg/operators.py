"""Finite sparse truncations of operators on word spaces and source fibers.

Every operator carries a depth radius: an upper bound on how far one
application can move a basis vector in any depth coordinate. Products add
radii and sums take the maximum. A truncated composite is exact on every
column whose depth coordinates all sit at least ``radius`` below the bounds
of its basis, so identities are only ever asserted on that interior.

Word spaces use the basis {delta_mu}; source fibers use canonical
(prefix, cut) pairs from :mod:`ckalg.groupoid`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import cached_property
from itertools import product as cartesian
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .groupoid import (
    UNIT,
    FiberElement,
    enumerate_fiber,
    fiber_admissible,
    fiber_left_multiply,
    fiber_psi,
)
from .measure import ConformalMeasure
from .sft_core import (
    DEFAULT_WORD_CAP,
    EMPTY,
    AdjacencyMatrix,
    Point,
    Word,
    enumerate_words,
    format_word,
    word_key,
)

FLOAT_TOL = 1e-12
KERNEL_RTOL = 1e-9

ChoiceRule = Callable[[Word], Point]


class CylinderViolation(ValueError):
    def __init__(self, word: Word, point: Point):
        super().__init__(f"choice for {format_word(word)} is {point}, outside its cylinder")
        self.word = word
        self.point = point


class UnstableIndex(RuntimeError):
    def __init__(self, dims: dict):
        super().__init__(f"kernel dimensions change with depth: {dims}")
        self.dims = dims


class BasisMismatch(ValueError):
    pass


# ---------------------------------------------------------------- bases and operators


@dataclass(frozen=True, eq=False)
class LabeledBasis:
    """Ordered labels with integer depth coordinates and per-coordinate bounds."""

    labels: tuple
    coords: tuple[tuple[int, ...], ...]
    bounds: tuple[int, ...]
    name: str = ""

    def __post_init__(self) -> None:
        if len(self.coords) != len(self.labels):
            raise ValueError("one coordinate tuple per label is required")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("basis labels must be distinct")

    @cached_property
    def _index(self) -> dict:
        return {label: i for i, label in enumerate(self.labels)}

    @cached_property
    def _coord_array(self) -> np.ndarray:
        return np.array(self.coords, dtype=int).reshape(len(self.labels), len(self.bounds))

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: Hashable) -> int | None:
        return self._index.get(label)

    def depth_of(self, label: Hashable) -> int:
        return int(sum(self.coords[self._index[label]]))

    @property
    def max_depth(self) -> int:
        return int(sum(self.bounds))

    def interior_mask(self, radius: int) -> np.ndarray:
        if not self.labels:
            return np.zeros(0, dtype=bool)
        return np.all(self._coord_array <= np.array(self.bounds) - radius, axis=1)

    def interior_labels(self, radius: int) -> list:
        mask = self.interior_mask(radius)
        return [label for label, keep in zip(self.labels, mask) if keep]

    def subbasis(self, keep: Callable[[Hashable], bool], name: str = "") -> "LabeledBasis":
        idx = [i for i, label in enumerate(self.labels) if keep(label)]
        return LabeledBasis(
            tuple(self.labels[i] for i in idx),
            tuple(self.coords[i] for i in idx),
            self.bounds,
            name or self.name,
        )


def _same_basis(a: LabeledBasis, b: LabeledBasis) -> bool:
    return a is b or (a.labels == b.labels and a.bounds == b.bounds)


@dataclass(frozen=True, eq=False)
class SparseOperator:
    basis_in: LabeledBasis
    basis_out: LabeledBasis
    matrix: sp.csr_matrix
    radius: int

    def __post_init__(self) -> None:
        if self.matrix.shape != (len(self.basis_out), len(self.basis_in)):
            raise BasisMismatch(f"matrix shape {self.matrix.shape} does not fit the bases")

    def __matmul__(self, other: "SparseOperator") -> "SparseOperator":
        if not _same_basis(self.basis_in, other.basis_out):
            raise BasisMismatch(f"cannot compose {self.basis_in.name} with {other.basis_out.name}")
        return SparseOperator(other.basis_in, self.basis_out, (self.matrix @ other.matrix).tocsr(), self.radius + other.radius)

    def _check_same(self, other: "SparseOperator") -> None:
        if not (_same_basis(self.basis_in, other.basis_in) and _same_basis(self.basis_out, other.basis_out)):
            raise BasisMismatch("operators act between different bases")

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        self._check_same(other)
        return SparseOperator(self.basis_in, self.basis_out, (self.matrix + other.matrix).tocsr(), max(self.radius, other.radius))

    def __sub__(self, other: "SparseOperator") -> "SparseOperator":
        return self + (-1.0) * other

    def __rmul__(self, scalar: float) -> "SparseOperator":
        return SparseOperator(self.basis_in, self.basis_out, (scalar * self.matrix).tocsr(), self.radius)

    def __neg__(self) -> "SparseOperator":
        return (-1.0) * self

    @property
    def H(self) -> "SparseOperator":
        return SparseOperator(self.basis_out, self.basis_in, self.matrix.conj().T.tocsr(), self.radius)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def interior_columns(self, radius: int | None = None) -> np.ndarray:
        """Dense block of all rows and the interior columns."""
        mask = self.basis_in.interior_mask(self.radius if radius is None else radius)
        return self.matrix[:, np.flatnonzero(mask)].toarray()

    def interior_defect(self, other: "SparseOperator | None" = None) -> float:
        """Largest entry of self - other over columns interior for the difference."""
        diff = self if other is None else self - other
        mask = diff.basis_in.interior_mask(diff.radius)
        block = diff.matrix[:, np.flatnonzero(mask)]
        return float(np.max(np.abs(block.data))) if block.nnz else 0.0

    def interior_witness(self, other: "SparseOperator | None" = None) -> tuple[float, Hashable | None]:
        """Largest interior defect together with the basis label of a column attaining it."""
        diff = self if other is None else self - other
        cols = np.flatnonzero(diff.basis_in.interior_mask(diff.radius))
        block = diff.matrix[:, cols].tocoo()
        if not block.nnz:
            return 0.0, None
        k = int(np.argmax(np.abs(block.data)))
        return float(abs(block.data[k])), diff.basis_in.labels[cols[block.col[k]]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["row_label", "col_label", "value"])
        coo = self.matrix.tocoo()
        for r, c, v in sorted(zip(coo.row, coo.col, coo.data)):
            writer.writerow([_label_str(self.basis_out.labels[r]), _label_str(self.basis_in.labels[c]), repr(float(v))])
        return buf.getvalue()


def _label_str(label: Hashable) -> str:
    if isinstance(label, tuple) and all(isinstance(x, int) for x in label):
        return format_word(label)
    if isinstance(label, tuple):
        return "|".join(_label_str(x) if isinstance(x, tuple) else str(x) for x in label)
    return str(label)


def operator_from_images(
    basis_in: LabeledBasis,
    basis_out: LabeledBasis,
    images: Callable[[Hashable], Iterable[tuple[Hashable, float]]],
    radius: int,
) -> SparseOperator:
    """Assemble column by column; targets outside ``basis_out`` are dropped."""
    rows, cols, vals = [], [], []
    for c, label in enumerate(basis_in.labels):
        for target, value in images(label):
            r = basis_out.index(target)
            if r is not None and value != 0:
                rows.append(r)
                cols.append(c)
                vals.append(value)
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(len(basis_out), len(basis_in)), dtype=float)
    mat.sum_duplicates()
    return SparseOperator(basis_in, basis_out, mat, radius)


def identity(basis: LabeledBasis) -> SparseOperator:
    return SparseOperator(basis, basis, sp.identity(len(basis), format="csr", dtype=float), 0)


def zero(basis_in: LabeledBasis, basis_out: LabeledBasis | None = None) -> SparseOperator:
    out = basis_in if basis_out is None else basis_out
    return SparseOperator(basis_in, out, sp.csr_matrix((len(out), len(basis_in)), dtype=float), 0)


def diagonal(basis: LabeledBasis, values: Iterable[float]) -> SparseOperator:
    vals = np.asarray(list(values), dtype=float)
    return SparseOperator(basis, basis, sp.diags(vals, format="csr"), 0)


def projection(basis: LabeledBasis, keep: Callable[[Hashable], bool]) -> SparseOperator:
    return diagonal(basis, [1.0 if keep(label) else 0.0 for label in basis.labels])


def compress(op: SparseOperator, sub_in: LabeledBasis, sub_out: LabeledBasis | None = None) -> SparseOperator:
    """Matrix of ``op`` between sub-bases (rows and columns restricted)."""
    sub_out = sub_in if sub_out is None else sub_out
    cols = [op.basis_in.index(label) for label in sub_in.labels]
    rows = [op.basis_out.index(label) for label in sub_out.labels]
    if None in cols or None in rows:
        raise BasisMismatch("sub-basis label missing from the ambient basis")
    return SparseOperator(sub_in, sub_out, op.matrix[rows][:, cols].tocsr(), op.radius)


# ---------------------------------------------------------------- word space


def word_basis(a: AdjacencyMatrix, depth: int, cap: int = DEFAULT_WORD_CAP, name: str = "words") -> LabeledBasis:
    words = sorted(enumerate_words(a, depth, cap), key=word_key)
    return LabeledBasis(tuple(words), tuple((len(w),) for w in words), (depth,), name)


def build_L(a: AdjacencyMatrix, basis: LabeledBasis, i: int) -> SparseOperator:
    """delta_mu -> delta_{i mu} when admissible."""

    def image(mu: Word):
        if not mu or a.allowed(i, mu[0]):
            yield (i,) + mu, 1.0

    return operator_from_images(basis, basis, image, 1)


def build_R(a: AdjacencyMatrix, basis: LabeledBasis, i: int) -> SparseOperator:
    """delta_mu -> delta_{mu i} when admissible."""

    def image(mu: Word):
        if not mu or a.allowed(mu[-1], i):
            yield mu + (i,), 1.0

    return operator_from_images(basis, basis, image, 1)


def build_L_word(a: AdjacencyMatrix, basis: LabeledBasis, word: Sequence[int]) -> SparseOperator:
    """delta_mu -> delta_{word mu}, the product L_{w_1} ... L_{w_k}."""
    op = identity(basis)
    for letter in reversed(tuple(word)):
        op = build_L(a, basis, letter) @ op
    return op


def build_R_append(a: AdjacencyMatrix, basis: LabeledBasis, word: Sequence[int]) -> SparseOperator:
    """delta_mu -> delta_{mu word}, the right creation operator for a whole word."""
    op = identity(basis)
    for letter in tuple(word):
        op = build_R(a, basis, letter) @ op
    return op


def empty_projection(basis: LabeledBasis) -> SparseOperator:
    return projection(basis, lambda mu: len(mu) == 0)


def cylinder_projection(a: AdjacencyMatrix, basis: LabeledBasis, letter: int) -> SparseOperator:
    """L_j L_j^*, the projection onto words starting with ``letter``."""
    return projection(basis, lambda mu: len(mu) > 0 and mu[0] == letter)


def lambda_projection(a: AdjacencyMatrix, basis: LabeledBasis, lam: Sequence[int]) -> SparseOperator:
    """Projection onto words ending in ``lam``, assembled as R R^* for the appending operator."""
    r = build_R_append(a, basis, lam)
    return r @ r.H


def build_V_sigma(a: AdjacencyMatrix, basis: LabeledBasis) -> SparseOperator:
    """(V f)(v) = f(shift v) for v nonempty and 0 at the empty word."""

    def image(mu: Word):
        for j in range(a.n):
            if not mu or a.allowed(j, mu[0]):
                yield (j,) + mu, 1.0

    return operator_from_images(basis, basis, image, 1)


def cylinder_indicator(word: Sequence[int]) -> Callable[[Point], float]:
    w = tuple(word)
    return lambda x: 1.0 if x.in_cylinder(w) else 0.0


def pi_choice(basis: LabeledBasis, choice: ChoiceRule, f: Callable[[Point], float]) -> SparseOperator:
    """The diagonal multiplication operator delta_mu -> f(choice(mu)) delta_mu."""
    return diagonal(basis, [f(choice(mu)) for mu in basis.labels])


def check_cylinder_condition(basis: LabeledBasis, choice: ChoiceRule) -> None:
    for mu in basis.labels:
        point = choice(mu)
        if not point.in_cylinder(mu):
            raise CylinderViolation(mu, point)


def build_s_it(a: AdjacencyMatrix, basis: LabeledBasis, i: int, choice: ChoiceRule) -> SparseOperator:
    """pi_t(chi_{C_i}) V_sigma for a choice function with the cylinder condition."""
    check_cylinder_condition(basis, choice)
    return pi_choice(basis, choice, cylinder_indicator((i,))) @ build_V_sigma(a, basis)


# ---------------------------------------------------------------- monomials S_nu^* S_gamma


@dataclass(frozen=True)
class MonomialProduct:
    kind: str  # "S", "Q", "S*", "0" or "1"
    word: Word
    defect: float
    interior_depth: int

    def __str__(self) -> str:
        if self.kind in ("S", "S*"):
            return f"{self.kind}_{format_word(self.word)}"
        if self.kind == "Q":
            return f"Q_{self.word[0] + 1}"
        return self.kind


def classify_monomial(nu: Sequence[int], gamma: Sequence[int]) -> tuple[str, Word]:
    """Reduce S_nu^* S_gamma for admissible words to a single monomial.

    Prefix comparison decides everything: equal words leave the source
    projection of the last letter, a proper prefix leaves a creation or an
    annihilation operator for the remaining tail, and incomparable words give 0.
    """
    nu, gamma = tuple(nu), tuple(gamma)
    if nu == gamma:
        return ("Q", (nu[-1],)) if nu else ("1", EMPTY)
    if gamma[: len(nu)] == nu:
        return "S", gamma[len(nu):]
    if nu[: len(gamma)] == gamma:
        return "S*", nu[len(gamma):]
    return "0", EMPTY


def source_projection(a: AdjacencyMatrix, basis: LabeledBasis, letter: int) -> SparseOperator:
    """S_j^* S_j on the word space: sum_l A(j,l) L_l L_l^* + P_empty."""
    op = empty_projection(basis)
    for l in a.followers[letter]:
        op = op + cylinder_projection(a, basis, l)
    return op


def monomial_product_check(a: AdjacencyMatrix, basis: LabeledBasis, nu: Sequence[int], gamma: Sequence[int]) -> MonomialProduct:
    nu, gamma = a.check_word(nu), a.check_word(gamma)
    kind, word = classify_monomial(nu, gamma)
    actual = build_L_word(a, basis, nu).H @ build_L_word(a, basis, gamma)
    if kind == "S":
        predicted = build_L_word(a, basis, word)
    elif kind == "S*":
        predicted = build_L_word(a, basis, word).H
    elif kind == "Q":
        predicted = source_projection(a, basis, word[0])
    elif kind == "1":
        predicted = identity(basis)
    else:
        predicted = zero(basis)
    diff = actual - predicted
    return MonomialProduct(kind, word, diff.interior_defect(), basis.bounds[0] - diff.radius)


# ---------------------------------------------------------------- GNS space and W_lambda


def build_gns_S(m: ConformalMeasure, gns: LabeledBasis, i: int) -> SparseOperator:
    """S_i on the orthonormal family {c_mu S_mu}: coefficient c_mu / c_{i mu}."""
    a = m.matrix

    def image(mu: Word):
        if not mu or a.allowed(i, mu[0]):
            yield (i,) + mu, m.c_constant(mu) / m.c_constant((i,) + mu)

    return operator_from_images(gns, gns, image, 1)


def in_V_lambda(mu: Word, lam: Sequence[int]) -> bool:
    lam = tuple(lam)
    return len(mu) >= len(lam) and mu[len(mu) - len(lam):] == lam


def build_W_lambda(basis: LabeledBasis, gns: LabeledBasis, lam: Sequence[int]) -> SparseOperator:
    """delta_mu -> c_mu S_mu for mu ending in lam, and 0 otherwise."""
    lam = tuple(lam)

    def image(mu: Word):
        if in_V_lambda(mu, lam):
            yield mu, 1.0

    return operator_from_images(basis, gns, image, 0)


@dataclass(frozen=True)
class WLambdaReport:
    lam: Word
    isometry_defect: float
    intertwining_defects: tuple[float, ...]
    depth: int

    def to_json(self) -> dict:
        return {
            "lambda": [x + 1 for x in self.lam],
            "isometry_defect": self.isometry_defect,
            "intertwining_defects": list(self.intertwining_defects),
            "depth": self.depth,
        }


def w_lambda_checks(m: ConformalMeasure, depth: int, lam: Sequence[int]) -> WLambdaReport:
    """Defects of W^*W = P_lam and W^* pi(S_i) W = L_i P_lam on the interior."""
    a = m.matrix
    lam = a.check_word(lam)
    basis = word_basis(a, depth)
    gns = word_basis(a, depth, name="gns")
    w = build_W_lambda(basis, gns, lam)
    p_lam = lambda_projection(a, basis, lam)
    iso = (w.H @ w).interior_defect(p_lam)
    inter = tuple(
        (w.H @ build_gns_S(m, gns, i) @ w).interior_defect(build_L(a, basis, i) @ p_lam) for i in range(a.n)
    )
    return WLambdaReport(lam, iso, inter, depth)


# ---------------------------------------------------------------- the isometry into the exterior tensor product


def pair_basis(a: AdjacencyMatrix, depth: int, cap: int = DEFAULT_WORD_CAP) -> LabeledBasis:
    """Pairs (mu, nu) of admissible words with |mu| + |nu| <= depth."""
    table = enumerate_words(a, depth, cap)
    pairs = []
    for total in range(depth + 1):
        for left in range(total + 1):
            for mu in table.of_length(left):
                for nu in table.of_length(total - left):
                    pairs.append((mu, nu))
    pairs.sort(key=lambda p: (len(p[0]) + len(p[1]), word_key(p[0]), word_key(p[1])))
    return LabeledBasis(tuple(pairs), tuple((len(p[0]) + len(p[1]),) for p in pairs), (depth,), "pairs")


def gamma_entry(length: int) -> float:
    """Diagonal entry of the defect operator at word length ``length``."""
    return math.sqrt((length + 1) / (length + 2)) - 1.0


def build_KP_isometry(basis: LabeledBasis, pairs: LabeledBasis) -> tuple[SparseOperator, SparseOperator]:
    """delta_lam -> (|lam|+1)^(-1/2) sum over splittings lam = mu nu, and the diagonal defect."""

    def image(lam: Word):
        weight = (len(lam) + 1) ** -0.5
        for cut in range(len(lam) + 1):
            yield (lam[:cut], lam[cut:]), weight

    w = operator_from_images(basis, pairs, image, 0)
    gamma = diagonal(basis, [gamma_entry(len(lam)) for lam in basis.labels])
    return w, gamma


def build_pair_S(m: ConformalMeasure, pairs: LabeledBasis, i: int) -> SparseOperator:
    """pi(S_i) tensor 1 on the pair basis."""
    a = m.matrix
    first = 1.0 / m.c_constant((i,))

    def image(p):
        mu, nu = p
        if not mu:
            yield ((i,), nu), first
        elif a.allowed(i, mu[0]):
            yield ((i,) + mu, nu), 1.0

    return operator_from_images(pairs, pairs, image, 1)


def build_pair_T(m_transpose: ConformalMeasure, pairs: LabeledBasis, i: int) -> SparseOperator:
    """1 tensor pi(T_i): the second word grows on the right.

    The normalising constant of the second factor depends on the first
    letter of nu (the last letter of the reversed word), so only the step
    from the empty word carries a nontrivial coefficient.
    """
    at = m_transpose.matrix
    first = 1.0 / m_transpose.c_constant((i,))

    def image(p):
        mu, nu = p
        if not nu:
            yield (mu, (i,)), first
        elif at.allowed(i, nu[-1]):
            yield (mu, nu + (i,)), 1.0

    return operator_from_images(pairs, pairs, image, 1)


@dataclass(frozen=True)
class KPReport:
    isometry_defect: float
    left_defects: tuple[float, ...]
    right_defects: tuple[float, ...]
    depth: int

    def to_json(self) -> dict:
        return {
            "isometry_defect": self.isometry_defect,
            "left_defects": list(self.left_defects),
            "right_defects": list(self.right_defects),
            "depth": self.depth,
        }


def kp_checks(a: AdjacencyMatrix, depth: int, tol: float = 1e-12) -> KPReport:
    m, mt = ConformalMeasure.of(a, tol), ConformalMeasure.of(a.transpose(), tol)
    basis = word_basis(a, depth)
    pairs = pair_basis(a, depth)
    w, gamma = build_KP_isometry(basis, pairs)
    iso = (w.H @ w).interior_defect(identity(basis))
    left, right = [], []
    for i in range(a.n):
        l_i, r_i = build_L(a, basis, i), build_R(a, basis, i)
        left.append((w.H @ build_pair_S(m, pairs, i) @ w - l_i).interior_defect(l_i @ gamma))
        right.append((w.H @ build_pair_T(mt, pairs, i) @ w - r_i).interior_defect(r_i @ gamma))
    return KPReport(iso, tuple(left), tuple(right), depth)


# ---------------------------------------------------------------- source fiber representation


def fiber_basis(
    a: AdjacencyMatrix, base: Point, max_prefix: int, max_cut: int, cap: int = DEFAULT_WORD_CAP
) -> LabeledBasis:
    elements = enumerate_fiber(a, base, max_prefix, max_cut, cap)
    return LabeledBasis(
        tuple(elements), tuple((len(e.prefix), e.cut) for e in elements), (max_prefix, max_cut), "fiber"
    )


def build_fiber_S(a: AdjacencyMatrix, base: Point, basis: LabeledBasis, i: int) -> SparseOperator:
    def image(e: FiberElement):
        target = fiber_left_multiply(a, base, e, i)
        if target is not None:
            yield target, 1.0

    return operator_from_images(basis, basis, image, 1)


def fiber_first_letter(base: Point, e: FiberElement) -> int:
    return e.prefix[0] if e.prefix else base.letter(e.cut)


def build_fiber_cylinder(base: Point, basis: LabeledBasis, word: Sequence[int]) -> SparseOperator:
    """Multiplication by the indicator of C_word evaluated at the range point."""
    w = tuple(word)

    def keep(e: FiberElement) -> bool:
        return base.shift(e.cut).prepend(e.prefix).in_cylinder(w)

    return projection(basis, keep)


@dataclass(frozen=True, eq=False)
class FiberRep:
    matrix: AdjacencyMatrix
    base: Point
    lam: Word
    basis: LabeledBasis
    words: LabeledBasis
    S: tuple[SparseOperator, ...]
    D: SparseOperator
    P_omega: SparseOperator
    iota: SparseOperator
    W: SparseOperator

    @cached_property
    def psi(self) -> np.ndarray:
        return self.D.matrix.diagonal()

    def kernel_labels(self) -> list[FiberElement]:
        return [e for e, d in zip(self.basis.labels, self.psi) if d == 0]

    def positive_basis(self) -> LabeledBasis:
        psi = dict(zip(self.basis.labels, self.psi))
        return self.basis.subbasis(lambda e: psi[e] > 0, "fiber+")

    def phase_formula(self) -> SparseOperator:
        ww = self.W @ self.W.H
        one = identity(self.basis)
        if self.lam:
            return 2.0 * ww + self.P_omega - one
        return 2.0 * ww - self.P_omega - one

    def phase_defect(self) -> float:
        return diagonal_sign(self.D).interior_defect(self.phase_formula())

    def w_rank(self) -> int:
        return int(round((self.W.H @ self.W).matrix.diagonal().sum()))


def build_fiber_rep(a: AdjacencyMatrix, base: Point, lam: Sequence[int], max_prefix: int, max_cut: int) -> FiberRep:
    lam = a.check_word(lam)
    basis = fiber_basis(a, base, max_prefix, max_cut)
    words = word_basis(a, max_prefix)
    S = tuple(build_fiber_S(a, base, basis, i) for i in range(a.n))
    D = diagonal(basis, [fiber_psi(e, lam) for e in basis.labels])
    p_omega = projection(basis, lambda e: e == UNIT)

    def embed(mu: Word):
        if fiber_admissible(a, base, mu, 0):
            yield FiberElement(0, mu), 1.0

    iota = operator_from_images(words, basis, embed, 0)
    W = iota @ lambda_projection(a, words, lam) if lam else iota
    return FiberRep(a, base, lam, basis, words, S, D, p_omega, iota, W)


def commutator_norm_bound_check(rep: FiberRep, i: int) -> float:
    """Operator norm of [D, S_i] over interior columns."""
    comm = rep.D @ rep.S[i] - rep.S[i] @ rep.D
    block = comm.interior_columns()
    return operator_norm(block) if block.size else 0.0


# ---------------------------------------------------------------- spectral tools


def _as_dense(op: SparseOperator | np.ndarray) -> np.ndarray:
    return op.dense() if isinstance(op, SparseOperator) else np.asarray(op)


def singular_values(op: SparseOperator | np.ndarray) -> np.ndarray:
    mat = _as_dense(op)
    if mat.size == 0:
        return np.zeros(0)
    return np.linalg.svd(mat, compute_uv=False)


def operator_norm(op: SparseOperator | np.ndarray) -> float:
    s = singular_values(op)
    return float(s[0]) if s.size else 0.0


def schatten_norm(op: SparseOperator | np.ndarray, p: float) -> float:
    s = singular_values(op)
    if math.isinf(p):
        return float(s[0]) if s.size else 0.0
    return float(np.sum(s**p) ** (1.0 / p))


def heat_trace(values: Iterable[float], t: float) -> float:
    d = np.asarray(list(values), dtype=float)
    return float(np.sum(np.exp(-t * d**2)))


def _require_diagonal(op: SparseOperator) -> np.ndarray:
    off = op.matrix - sp.diags(op.matrix.diagonal())
    if off.count_nonzero():
        raise ValueError("operator is not diagonal")
    return op.matrix.diagonal()


def diagonal_sign(op: SparseOperator) -> SparseOperator:
    """Phase of a diagonal operator, set to 0 on its kernel."""
    return diagonal(op.basis_in, np.sign(_require_diagonal(op)))


def kernel_dim(mat: np.ndarray, rtol: float = KERNEL_RTOL) -> int:
    """Dimension of the null space of a (possibly rectangular) matrix."""
    mat = np.asarray(mat)
    cols = mat.shape[1] if mat.ndim == 2 else 0
    if cols == 0:
        return 0
    if mat.shape[0] == 0:
        return cols
    s = np.linalg.svd(mat, compute_uv=False)
    if s[0] == 0.0:
        return cols
    return cols - int(np.sum(s > rtol * s[0]))


@dataclass(frozen=True)
class IndexReport:
    index: int
    kernel: int
    cokernel: int
    depth: int
    checked_depths: tuple[int, ...]

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "kernel": self.kernel,
            "cokernel": self.cokernel,
            "depth": self.depth,
            "checked_depths": list(self.checked_depths),
        }


def _kernel_pair(op: SparseOperator) -> tuple[int, int]:
    return kernel_dim(op.interior_columns()), kernel_dim(op.H.interior_columns())


def fredholm_index(builder: Callable[[int], SparseOperator], depth: int) -> IndexReport:
    """dim ker T - dim ker T^* on the interior, checked for stability at depth + 1."""
    dims = {d: _kernel_pair(builder(d)) for d in (depth, depth + 1)}
    if len(set(dims.values())) != 1:
        raise UnstableIndex(dims)
    ker, coker = dims[depth]
    return IndexReport(ker - coker, ker, coker, depth, (depth, depth + 1))


def positive_compression(rep: FiberRep, op: SparseOperator) -> SparseOperator:
    """P_+ op P_+ as an operator on the range of the positive spectral projection of D."""
    return compress(op, rep.positive_basis())


def suq2_index_operator(depth: int) -> SparseOperator:
    """Compression of S_2 + S_1 S_1^* to the positive part over the fixed point 2^infinity."""
    from .sft_core import constant_point, quantum_su2

    a = quantum_su2()
    rep = build_fiber_rep(a, constant_point(1), (1,), depth, depth)
    u = rep.S[1] + rep.S[0] @ rep.S[0].H
    return positive_compression(rep, u)


# ---------------------------------------------------------------- gauge modules


@dataclass(frozen=True)
class GaugeReport:
    n: int
    positive_defect: float
    negative_defect: float
    bounds: tuple[int, int]
    nonzero_terms: int

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "positive_defect": self.positive_defect,
            "negative_defect": self.negative_defect,
            "bounds": list(self.bounds),
            "nonzero_terms": self.nonzero_terms,
        }


def gauge_module_checks(a: AdjacencyMatrix, base: Point, n: int, bounds: tuple[int, int] | None = None) -> GaugeReport:
    """Check sum_{|mu|=n} S_mu S_mu^* = 1 and w_n^* w_n = 1 in the fiber representation."""
    if n < 1:
        raise ValueError("n must be positive")
    max_prefix, max_cut = bounds if bounds is not None else (2 * n + 1, 2 * n + 1)
    basis = fiber_basis(a, base, max_prefix, max_cut)
    S = [build_fiber_S(a, base, basis, i) for i in range(a.n)]
    P = [build_fiber_cylinder(base, basis, (j,)) for j in range(a.n)]
    N = a.col_sums
    one = identity(basis)

    def s_word(word: Sequence[int]) -> SparseOperator:
        op = one
        for letter in reversed(tuple(word)):
            op = S[letter] @ op
        return op

    positive = zero(basis)
    for mu in enumerate_words(a, n).of_length(n):
        s_mu = s_word(mu)
        positive = positive + s_mu @ s_mu.H

    negative, terms = zero(basis), 0
    for mu in cartesian(range(a.n), repeat=n):
        for nu in cartesian(range(a.n), repeat=n):
            r = one
            for letter, proj in zip(reversed(mu), reversed(nu)):
                r = S[letter] @ P[proj] @ r
            if r.matrix.count_nonzero() == 0:
                continue
            terms += 1
            weight = 1.0 / math.prod(N[j] for j in nu)
            negative = negative + weight * (r.H @ r)
    return GaugeReport(
        n, positive.interior_defect(one), negative.interior_defect(one), (max_prefix, max_cut), terms
    )
