"""Choice functions and the Bellissard-Pearson spectral triples on finite words.

A choice function assigns to each admissible word a point of its cylinder.
Here it is a named extension rule plus a finite table of overrides, which is
enough to realise the redefinitions needed to hit a prescribed index pairing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .operators import (
    LabeledBasis,
    SparseOperator,
    build_s_it,
    diagonal,
    heat_trace,
    operator_from_images,
    operator_norm,
    word_basis,
)
from .sft_core import (
    EMPTY,
    AdjacencyMatrix,
    Point,
    Word,
    enumerate_words,
    follower_orbit_point,
    format_word,
    longest_minimal_prefix,
    metric_distance,
    parse_word,
    word_key,
)

RULES = ("greedy-min", "greedy-max")


class NotMinimalizable(ValueError):
    pass


class UnknownRule(ValueError):
    pass


def _key(word: Word) -> str:
    return ",".join(str(a + 1) for a in word)


@dataclass(frozen=True, eq=False)
class ChoiceFunction:
    matrix: AdjacencyMatrix
    rule: str = "greedy-min"
    overrides: Mapping[Word, Point] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.rule not in RULES:
            raise UnknownRule(self.rule)
        object.__setattr__(self, "_cache", {})

    def __call__(self, word: Sequence[int]) -> Point:
        w = tuple(word)
        cache = self._cache  # type: ignore[attr-defined]
        if w not in cache:
            if w in self.overrides:
                cache[w] = self.overrides[w]
            else:
                cache[w] = follower_orbit_point(self.matrix, w, pick_max=self.rule == "greedy-max")
        return cache[w]

    def with_overrides(self, extra: Mapping[Word, Point]) -> "ChoiceFunction":
        merged = dict(self.overrides)
        merged.update(extra)
        return ChoiceFunction(self.matrix, self.rule, merged)

    def cylinder_violations(self, depth: int) -> list[Word]:
        return [w for w in enumerate_words(self.matrix, depth) if not self(w).in_cylinder(w)]

    def to_json(self) -> dict:
        return {
            "rule": self.rule,
            "overrides": {_key(w): p.to_json() for w, p in sorted(self.overrides.items(), key=lambda kv: word_key(kv[0]))},
        }

    @classmethod
    def from_json(cls, a: AdjacencyMatrix, data: Mapping) -> "ChoiceFunction":
        overrides = {parse_word(k): Point.from_json(v) for k, v in data.get("overrides", {}).items()}
        return cls(a, data.get("rule", "greedy-min"), overrides)


@dataclass(frozen=True, eq=False)
class ChoicePair:
    plus: ChoiceFunction
    minus: ChoiceFunction
    comparison_constant: float = 1.0

    @property
    def matrix(self) -> AdjacencyMatrix:
        return self.plus.matrix

    def comparison_defect(self, depth: int) -> float:
        """max over words of d(plus(mu), minus(mu)) e^{|mu|} - C; nonpositive means comparable."""
        worst = -math.inf
        for w in enumerate_words(self.matrix, depth):
            d = metric_distance(self.plus(w), self.minus(w))
            worst = max(worst, d * math.exp(len(w)) - self.comparison_constant)
        return worst

    def is_cylinder_compatible(self, depth: int) -> bool:
        return not self.plus.cylinder_violations(depth) and not self.minus.cylinder_violations(depth)

    def swapped(self) -> "ChoicePair":
        return ChoicePair(self.minus, self.plus, self.comparison_constant)

    def to_json(self) -> dict:
        return {"plus": self.plus.to_json(), "minus": self.minus.to_json()}

    @classmethod
    def from_json(cls, a: AdjacencyMatrix, data: Mapping) -> "ChoicePair":
        return cls(ChoiceFunction.from_json(a, data["plus"]), ChoiceFunction.from_json(a, data["minus"]))


def make_default_pair(a: AdjacencyMatrix) -> ChoicePair:
    return ChoicePair(ChoiceFunction(a, "greedy-min"), ChoiceFunction(a, "greedy-max"), 1.0)


# ---------------------------------------------------------------- index pairings


def _indicator(word: Word, x: Point) -> int:
    return 1 if x.in_cylinder(word) else 0


def index_pairing(pair: ChoicePair, mu: Sequence[int], depth: int | None = None) -> int:
    """Counting formula: sum over |nu| < |mu| of chi_mu(plus(nu)) - chi_mu(minus(nu))."""
    a = pair.matrix
    mu = a.check_word(mu)
    depth = len(mu) if depth is None else depth
    if depth < len(mu):
        raise ValueError("depth must be at least |mu|")
    total = 0
    for nu in enumerate_words(a, len(mu) - 1) if mu else ():
        total += _indicator(mu, pair.plus(nu)) - _indicator(mu, pair.minus(nu))
    return total


def pairing_trace(pair: ChoicePair, mu: Sequence[int], depth: int) -> int:
    """Trace of pi_plus(chi_mu) - pi_minus(chi_mu) over all words up to ``depth``."""
    a = pair.matrix
    mu = a.check_word(mu)
    basis = word_basis(a, depth)
    plus = np.array([_indicator(mu, pair.plus(w)) for w in basis.labels])
    minus = np.array([_indicator(mu, pair.minus(w)) for w in basis.labels])
    return int(plus.sum() - minus.sum())


def _sibling(a: AdjacencyMatrix, parent: Word, letter: int) -> int:
    options = [j for j in (a.followers[parent[-1]] if parent else range(a.n)) if j != letter]
    if not options:
        raise NotMinimalizable(f"no admissible sibling of {format_word(parent + (letter,))}")
    return options[0]


def construct_tau_for(a: AdjacencyMatrix, mu: Sequence[int], base: ChoicePair | None = None) -> ChoicePair:
    """A cylinder-compatible pair whose pairing with chi_{C_mu} equals 1.

    The word is first cut back to its longest minimal prefix, which spans the
    same cylinder. Its proper prefixes are then redefined: those two or more
    letters short get equal values, and the parent gets one value inside the
    cylinder and one inside a sibling cylinder.
    """
    mu = a.check_word(mu)
    if not mu:
        raise ValueError("the word must be nonempty")
    base = make_default_pair(a) if base is None else base
    target = longest_minimal_prefix(a, mu)
    plus_over: dict[Word, Point] = {}
    minus_over: dict[Word, Point] = {}
    for cut in range(len(target)):
        nu = target[:cut]
        p0, m0 = base.plus(nu), base.minus(nu)
        if cut < len(target) - 1:
            if p0 != m0:
                plus_over[nu] = minus_over[nu] = m0
            continue
        inside_p, inside_m = p0.in_cylinder(target), m0.in_cylinder(target)
        if p0 != m0 and inside_p and not inside_m:
            continue
        if p0 != m0 and inside_m and not inside_p:
            plus_over[nu], minus_over[nu] = m0, p0
            continue
        sibling = nu + (_sibling(a, nu, target[-1]),)
        plus_over[nu] = p0 if inside_p else base.plus(target)
        minus_over[nu] = base.minus(sibling)
    return ChoicePair(base.plus.with_overrides(plus_over), base.minus.with_overrides(minus_over), base.comparison_constant)


# ---------------------------------------------------------------- the spectral triples


@dataclass(frozen=True)
class BPTriple:
    pair: ChoicePair
    s: float | None  # None selects the exponential weights
    depth: int

    def weight(self, length: int) -> float:
        if self.s is None:
            return math.exp(length)
        return float(length) ** self.s if length else 0.0


def doubled_basis(a: AdjacencyMatrix, depth: int) -> LabeledBasis:
    words = sorted(enumerate_words(a, depth), key=word_key)
    labels = tuple((w, sheet) for w in words for sheet in (1, -1))
    return LabeledBasis(labels, tuple((len(w),) for w, _ in labels), (depth,), "doubled")


def bp_operator(triple: BPTriple) -> tuple[SparseOperator, SparseOperator]:
    """The sheet-swapping operator with weight per word, and the grading."""
    basis = doubled_basis(triple.pair.matrix, triple.depth)

    def image(label):
        w, sheet = label
        yield (w, -sheet), triple.weight(len(w))

    d = operator_from_images(basis, basis, image, 0)
    grading = diagonal(basis, [sheet for _, sheet in basis.labels])
    return d, grading


def pi_tau(triple: BPTriple, basis: LabeledBasis, f: Callable[[Point], float]) -> SparseOperator:
    pair = triple.pair
    return diagonal(basis, [f(pair.plus(w) if sheet > 0 else pair.minus(w)) for w, sheet in basis.labels])


def bp_heat_trace_formula(a: AdjacencyMatrix, depth: int, s: float, t: float) -> float:
    from .sft_core import count_words

    return 2.0 * sum(count_words(a, k) * math.exp(-t * float(k) ** (2 * s)) for k in range(depth + 1))


def bp_heat_trace(triple: BPTriple, t: float) -> float:
    d, _ = bp_operator(triple)
    return heat_trace(np.linalg.eigvalsh(d.dense()), t)


def doubled_s(triple: BPTriple, basis: LabeledBasis, i: int) -> SparseOperator:
    """s_{i,plus} on the plus sheet and s_{i,minus} on the minus sheet."""
    a = triple.pair.matrix
    words = word_basis(a, triple.depth)
    sheets = {1: build_s_it(a, words, i, triple.pair.plus), -1: build_s_it(a, words, i, triple.pair.minus)}

    def image(label):
        w, sheet = label
        op = sheets[sheet]
        col = op.matrix.getcol(words.index(w)).tocoo()
        for r, v in zip(col.row, col.data):
            yield (words.labels[r], sheet), float(v)

    return operator_from_images(basis, basis, image, 1)


@dataclass(frozen=True)
class CommutatorDiagnostics:
    kind: str
    rank: int | None = None
    rank_bound: int | None = None
    norm: float | None = None
    growth: tuple[float, ...] = ()
    growth_floor: tuple[float, ...] = ()
    depth: int = 0

    @property
    def passed(self) -> bool:
        if self.kind == "cylinder":
            return self.rank <= self.rank_bound
        if self.kind == "logarithmic":
            return self.norm <= 1.0 + 1e-12
        return all(g >= f for g, f in zip(self.growth, self.growth_floor))

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "rank": self.rank,
            "rank_bound": self.rank_bound,
            "norm": self.norm,
            "growth": list(self.growth),
            "growth_floor": list(self.growth_floor),
            "depth": self.depth,
            "passed": self.passed,
        }


def cylinder_commutator_rank(triple: BPTriple, mu: Sequence[int]) -> CommutatorDiagnostics:
    """Rank of [F, pi_tau(chi_mu)] with F the unweighted sheet swap."""
    from .sft_core import count_words

    a = triple.pair.matrix
    mu = a.check_word(mu)
    basis = doubled_basis(a, triple.depth)
    swap = operator_from_images(basis, basis, lambda lab: [((lab[0], -lab[1]), 1.0)], 0)
    f = pi_tau(triple, basis, lambda x: 1.0 if x.in_cylinder(mu) else 0.0)
    comm = (swap @ f - f @ swap).dense()
    rank = int(np.linalg.matrix_rank(comm)) if comm.size else 0
    bound = 2 * sum(count_words(a, k) for k in range(len(mu)))
    return CommutatorDiagnostics("cylinder", rank=rank, rank_bound=bound, depth=triple.depth)


def _witness_chain(a: AdjacencyMatrix, i: int, depth: int) -> list[Word]:
    """Words mu_k of length k with i mu_k admissible, grown by smallest followers."""
    chain: list[Word] = [EMPTY]
    w: Word = EMPTY
    prev = i
    for _ in range(depth - 1):
        nxt = a.followers[prev][0]
        w = w + (nxt,)
        prev = nxt
        chain.append(w)
    return chain


def generator_commutator(triple: BPTriple, i: int) -> CommutatorDiagnostics:
    """[D, s_i] for the logarithmic (norm) or exponential (growth) weights."""
    a = triple.pair.matrix
    basis = doubled_basis(a, triple.depth)
    d, _ = bp_operator(triple)
    s = doubled_s(triple, basis, i)
    comm = d @ s - s @ d
    if triple.s is not None:
        block = comm.interior_columns()
        return CommutatorDiagnostics("logarithmic", norm=operator_norm(block) if block.size else 0.0, depth=triple.depth)
    growth, floor = [], []
    for k, w in enumerate(_witness_chain(a, i, triple.depth)):
        col = comm.matrix.getcol(basis.index((w, 1))).toarray().ravel()
        growth.append(float(np.linalg.norm(col)))
        floor.append((math.e - 1.0) * math.exp(k - 1))
    return CommutatorDiagnostics("exponential", growth=tuple(growth), growth_floor=tuple(floor), depth=triple.depth)
