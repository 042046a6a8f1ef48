"""Exact arithmetic on the Renault groupoid of a subshift of finite type.

Elements are triples (x, n, y) of eventually periodic points with
shift^(n+k) x == shift^k y for some k >= max(0, -n). The source fiber over a
point omega is parametrised by pairs (prefix, cut): the element with range
prefix . shift^cut(omega) and cocycle |prefix| - cut.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

from .sft_core import (
    AdjacencyMatrix,
    BlowupGuard,
    DEFAULT_WORD_CAP,
    EMPTY,
    Point,
    Word,
    enumerate_words,
    format_word,
    word_key,
)


class NotComposable(ValueError):
    pass


class InvalidElement(ValueError):
    pass


class CaseTableMismatch(AssertionError):
    """The closed-form table for the shift difference of psi disagreed with the definition."""


def _match_range(x: Point, n: int, y: Point) -> range:
    lo = max(0, -n)
    return range(lo, lo + x.scan_bound(y) + abs(n) + 1)


@dataclass(frozen=True, order=True)
class GroupoidElement:
    x: Point
    n: int
    y: Point

    def __post_init__(self) -> None:
        if self._first_match() is None:
            raise InvalidElement(f"no k with shift^(n+k) x = shift^k y for ({self.x}, {self.n}, {self.y})")

    def _first_match(self) -> int | None:
        for k in _match_range(self.x, self.n, self.y):
            if self.x.shift(self.n + k) == self.y.shift(k):
                return k
        return None

    @cached_property
    def kappa(self) -> int:
        k = self._first_match()
        assert k is not None
        return k

    @property
    def cocycle(self) -> int:
        return self.n

    def is_unit(self) -> bool:
        return self.n == 0 and self.x == self.y

    def compose(self, other: "GroupoidElement") -> "GroupoidElement":
        if self.y != other.x:
            raise NotComposable(f"{self.y} != {other.x}")
        return GroupoidElement(self.x, self.n + other.n, other.y)

    def invert(self) -> "GroupoidElement":
        return GroupoidElement(self.y, -self.n, self.x)

    def shift_range(self) -> "GroupoidElement":
        """(shift(x), n - 1, y), the element S_i^* moves to."""
        return GroupoidElement(self.x.shift(1), self.n - 1, self.y)

    def in_G0(self) -> bool:
        return self.kappa == 0

    def in_Y(self, lam: Sequence[int]) -> bool:
        lam = tuple(lam)
        if self.kappa != 0 or self.n < len(lam):
            return False
        return self.x.shift(self.n - len(lam)) == self.y.prepend(lam)

    def __str__(self) -> str:
        return f"({self.x}, {self.n}, {self.y})"


def kappa(xi: GroupoidElement) -> int:
    return xi.kappa


def in_Y_lambda(xi: GroupoidElement, lam: Sequence[int]) -> bool:
    return xi.in_Y(lam)


def psi_lambda(xi: GroupoidElement, lam: Sequence[int]) -> int:
    if xi.kappa != 0:
        return -abs(xi.n) - xi.kappa
    return xi.n if xi.in_Y(lam) else -xi.n


def a_lambda_direct(xi: GroupoidElement, lam: Sequence[int]) -> int:
    return psi_lambda(xi, lam) - psi_lambda(xi.shift_range(), lam)


def a_lambda_table(xi: GroupoidElement, lam: Sequence[int]) -> int:
    """Closed-form case table for psi(x,n,y) - psi(shift x, n-1, y).

    Units take the value 2 for every lam (the source of the shifted element
    has cocycle -1 and depth 1). The table is organised by membership of xi.
    """
    n, k = xi.n, xi.kappa
    length = len(tuple(lam))
    if k == 0:
        if n == 0:
            return 2
        if xi.in_Y(lam):
            return 2 * length - 1 if n == length else 1
        return -1
    if n > 0:
        return -1
    return 2 if n + k == 0 else 1


def a_lambda(xi: GroupoidElement, lam: Sequence[int], check: bool = True) -> int:
    value = a_lambda_direct(xi, lam)
    if check:
        table = a_lambda_table(xi, lam)
        if table != value:
            raise CaseTableMismatch(f"{xi}, lam={format_word(lam)}: direct {value}, table {table}")
    return value


def a_lambda_bound(lam: Sequence[int]) -> int:
    return max(2, 2 * len(tuple(lam)) - 1)


# ---------------------------------------------------------------- source fibers


@dataclass(frozen=True, order=True)
class FiberElement:
    """The groupoid element (prefix . shift^cut(base), |prefix| - cut, base)."""

    cut: int
    prefix: Word

    @property
    def n(self) -> int:
        return len(self.prefix) - self.cut

    def sort_key(self) -> tuple:
        return (self.cut, word_key(self.prefix))

    def to_element(self, base: Point) -> GroupoidElement:
        return GroupoidElement(base.shift(self.cut).prepend(self.prefix), self.n, base)

    def to_json(self) -> dict:
        return {"prefix": [a + 1 for a in self.prefix], "cut": self.cut}

    def __str__(self) -> str:
        return f"({format_word(self.prefix)},{self.cut})"


UNIT = FiberElement(0, EMPTY)


def fiber_admissible(a: AdjacencyMatrix, base: Point, prefix: Sequence[int], cut: int) -> bool:
    """Whether (prefix, cut) is a canonical representative over ``base``.

    The junction letter must be allowed, and when cut > 0 the last prefix
    letter must differ from the letter that was cut (otherwise a shorter
    representative with cut - 1 describes the same element).
    """
    prefix = tuple(prefix)
    if not prefix:
        return True
    last = prefix[-1]
    if not a.allowed(last, base.letter(cut)):
        return False
    return cut == 0 or last != base.letter(cut - 1)


def canonical_fiber_element(base: Point, prefix: Sequence[int], cut: int) -> FiberElement:
    """Strip letters agreeing with the cut part of ``base`` until canonical."""
    p = list(prefix)
    while cut > 0 and p and p[-1] == base.letter(cut - 1):
        p.pop()
        cut -= 1
    return FiberElement(cut, tuple(p))


def fiber_from_element(xi: GroupoidElement) -> FiberElement:
    """Inverse of FiberElement.to_element, via the depth function."""
    k = xi.kappa
    return FiberElement(k, xi.x.prefix(xi.n + k))


def enumerate_fiber(
    a: AdjacencyMatrix,
    base: Point,
    max_prefix: int,
    max_cut: int,
    cap: int = DEFAULT_WORD_CAP,
) -> list[FiberElement]:
    if max_prefix < 0 or max_cut < 0:
        raise ValueError("fiber bounds must be nonnegative")
    words = list(enumerate_words(a, max_prefix, cap))
    if len(words) * (max_cut + 1) > cap:
        raise BlowupGuard(len(words) * (max_cut + 1), cap)
    out = [
        FiberElement(k, w)
        for k in range(max_cut + 1)
        for w in words
        if fiber_admissible(a, base, w, k)
    ]
    out.sort(key=FiberElement.sort_key)
    return out


def fiber_psi(element: FiberElement, lam: Sequence[int]) -> int:
    """psi_lambda of a canonical fiber element, read off (prefix, cut) directly."""
    lam = tuple(lam)
    n = element.n
    if element.cut > 0:
        return -abs(n) - element.cut
    if len(element.prefix) >= len(lam) and element.prefix[len(element.prefix) - len(lam):] == lam:
        return n
    return -n


def fiber_csv(elements: Iterable[FiberElement], base: Point, lam: Sequence[int]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["prefix", "cut", "n", "kappa", "psi_lambda"])
    for e in elements:
        xi = e.to_element(base)
        writer.writerow([format_word(e.prefix), e.cut, e.n, xi.kappa, psi_lambda(xi, lam)])
    return buf.getvalue()


def fiber_left_multiply(a: AdjacencyMatrix, base: Point, element: FiberElement, i: int) -> FiberElement | None:
    """Image of a fiber basis vector under S_i, from the (prefix, cut) rules.

    Returns None when S_i kills the vector (the new first letter is not
    allowed before the old one).
    """
    prefix, cut = element.prefix, element.cut
    if prefix:
        return FiberElement(cut, (i,) + prefix) if a.allowed(i, prefix[0]) else None
    if cut > 0 and base.letter(cut - 1) == i:
        return FiberElement(cut - 1, EMPTY)
    return FiberElement(cut, (i,)) if a.allowed(i, base.letter(cut)) else None


def fiber_left_multiply_groupoid(
    a: AdjacencyMatrix, base: Point, element: FiberElement, i: int
) -> FiberElement | None:
    """Same map computed through points: (x, n, y) -> (i x, n + 1, y)."""
    xi = element.to_element(base)
    if not a.allowed(i, xi.x.first()):
        return None
    return fiber_from_element(GroupoidElement(xi.x.prepend((i,)), xi.n + 1, base))
