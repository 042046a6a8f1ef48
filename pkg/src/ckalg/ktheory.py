"""Exact K-theory and K-homology bookkeeping for Cuntz-Krieger algebras.

Everything here runs on Python integers. The Smith normal form carries its
unimodular witnesses so classes can be read off in cokernel coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .sft_core import AdjacencyMatrix

IntMatrix = list[list[int]]
INFINITE = "INFINITE"


class ContractNotApplicable(ValueError):
    """Full exactness checks need a matrix invertible over the integers."""


# ---------------------------------------------------------------- integer matrices


def _identity(n: int) -> IntMatrix:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def _copy(m: Sequence[Sequence[int]]) -> IntMatrix:
    return [[int(x) for x in row] for row in m]


def matmul(a: Sequence[Sequence[int]], b: Sequence[Sequence[int]]) -> IntMatrix:
    cols = len(b[0]) if b else 0
    return [[sum(a[i][k] * b[k][j] for k in range(len(b))) for j in range(cols)] for i in range(len(a))]


def matpow(a: Sequence[Sequence[int]], k: int) -> IntMatrix:
    out = _identity(len(a))
    for _ in range(k):
        out = matmul(out, a)
    return out


def det(m: Sequence[Sequence[int]]) -> int:
    """Bareiss fraction-free determinant."""
    a = _copy(m)
    n = len(a)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((r for r in range(k + 1, n) if a[r][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def charpoly(m: Sequence[Sequence[int]]) -> list[int]:
    """Coefficients of det(xI - m), highest degree first (Faddeev-LeVerrier, exact)."""
    n = len(m)
    coeffs = [1]
    aux = _identity(n)
    for k in range(1, n + 1):
        am = matmul(m, aux)
        c = -sum(am[i][i] for i in range(n)) // k
        coeffs.append(c)
        aux = [[am[i][j] + (c if i == j else 0) for j in range(n)] for i in range(n)]
    return coeffs


def core_determinant(m: Sequence[Sequence[int]]) -> int:
    """Product of the nonzero eigenvalues, i.e. the lowest nonzero characteristic coefficient up to sign."""
    coeffs = charpoly(m)
    for k, c in enumerate(reversed(coeffs)):
        if c:
            return abs(c) if k < len(coeffs) - 1 else 1
    return 1


def one_minus(a: AdjacencyMatrix, transpose: bool = False) -> IntMatrix:
    arr = a.array.T if transpose else a.array
    n = a.n
    return [[int(i == j) - int(arr[i][j]) for j in range(n)] for i in range(n)]


# ---------------------------------------------------------------- Smith normal form


@dataclass(frozen=True)
class SNFResult:
    """U M V = D with U, V unimodular and D diagonal in divisibility order."""

    D: tuple[tuple[int, ...], ...]
    U: tuple[tuple[int, ...], ...]
    V: tuple[tuple[int, ...], ...]

    @property
    def diagonal(self) -> tuple[int, ...]:
        return tuple(self.D[i][i] for i in range(min(len(self.D), len(self.D[0]) if self.D else 0)))

    @property
    def rank(self) -> int:
        return sum(1 for d in self.diagonal if d != 0)

    def invariant_factors(self) -> tuple[int, ...]:
        return tuple(d for d in self.diagonal if d > 1)


def _pivot(a: IntMatrix, t: int) -> tuple[int, int] | None:
    best = None
    for i in range(t, len(a)):
        for j in range(t, len(a[0])):
            v = abs(a[i][j])
            if v and (best is None or v < best[0]):
                best = (v, i, j)
    return None if best is None else (best[1], best[2])


def snf(m: Sequence[Sequence[int]]) -> SNFResult:
    """Smith normal form with the smallest-absolute-value, row-major pivot rule."""
    a = _copy(m)
    rows = len(a)
    cols = len(a[0]) if rows else 0
    u, v = _identity(rows), _identity(cols)

    def swap_rows(i: int, j: int) -> None:
        a[i], a[j] = a[j], a[i]
        u[i], u[j] = u[j], u[i]

    def swap_cols(i: int, j: int) -> None:
        for row in a:
            row[i], row[j] = row[j], row[i]
        for row in v:
            row[i], row[j] = row[j], row[i]

    def add_row(src: int, dst: int, q: int) -> None:
        a[dst] = [x + q * y for x, y in zip(a[dst], a[src])]
        u[dst] = [x + q * y for x, y in zip(u[dst], u[src])]

    def add_col(src: int, dst: int, q: int) -> None:
        for row in a:
            row[dst] += q * row[src]
        for row in v:
            row[dst] += q * row[src]

    for t in range(min(rows, cols)):
        while True:
            p = _pivot(a, t)
            if p is None:
                break
            swap_rows(t, p[0])
            swap_cols(t, p[1])
            piv = a[t][t]
            clean = True
            for i in range(t + 1, rows):
                q = a[i][t] // piv
                if q:
                    add_row(t, i, -q)
                clean &= a[i][t] == 0
            for j in range(t + 1, cols):
                q = a[t][j] // piv
                if q:
                    add_col(t, j, -q)
                clean &= a[t][j] == 0
            if not clean:
                continue
            # Divisibility: fold in any entry the pivot does not divide.
            bad = next(
                ((i, j) for i in range(t + 1, rows) for j in range(t + 1, cols) if a[i][j] % piv),
                None,
            )
            if bad is None:
                break
            add_row(bad[0], t, 1)
        if a[t][t] < 0:
            a[t] = [-x for x in a[t]]
            u[t] = [-x for x in u[t]]
    return SNFResult(
        tuple(tuple(r) for r in a), tuple(tuple(r) for r in u), tuple(tuple(r) for r in v)
    )


# ---------------------------------------------------------------- groups


@dataclass(frozen=True)
class FGAbelianGroup:
    free_rank: int
    invariant_factors: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.free_rank < 0 or any(d < 2 for d in self.invariant_factors):
            raise ValueError("invalid finitely generated abelian group")
        for x, y in zip(self.invariant_factors, self.invariant_factors[1:]):
            if y % x:
                raise ValueError("invariant factors must form a divisibility chain")

    @property
    def torsion_order(self) -> int:
        return math.prod(self.invariant_factors)

    def is_trivial(self) -> bool:
        return self.free_rank == 0 and not self.invariant_factors

    def to_json(self) -> dict:
        return {"free_rank": self.free_rank, "torsion": list(self.invariant_factors)}

    def __str__(self) -> str:
        parts = [f"Z/{d}" for d in self.invariant_factors]
        if self.free_rank:
            parts.insert(0, "Z" if self.free_rank == 1 else f"Z^{self.free_rank}")
        return " + ".join(parts) if parts else "0"


def cokernel(m: Sequence[Sequence[int]]) -> FGAbelianGroup:
    res = snf(m)
    return FGAbelianGroup(len(m) - res.rank, res.invariant_factors())


def kernel(m: Sequence[Sequence[int]]) -> FGAbelianGroup:
    res = snf(m)
    cols = len(m[0]) if m else 0
    return FGAbelianGroup(cols - res.rank)


@dataclass(frozen=True)
class KGroups:
    K0: FGAbelianGroup
    K1: FGAbelianGroup
    K0_hom: FGAbelianGroup
    K1_hom: FGAbelianGroup

    def to_json(self) -> dict:
        return {
            "K0": self.K0.to_json(),
            "K1": self.K1.to_json(),
            "K^0": self.K0_hom.to_json(),
            "K^1": self.K1_hom.to_json(),
        }


def k_groups(a: AdjacencyMatrix) -> KGroups:
    """K_0 = coker(1 - A^T), K_1 = ker(1 - A^T), K^1 = coker(1 - A), K^0 = ker(1 - A)."""
    mt, m = one_minus(a, transpose=True), one_minus(a)
    return KGroups(cokernel(mt), kernel(mt), kernel(m), cokernel(m))


# ---------------------------------------------------------------- classes in coker(1 - A)


@dataclass(frozen=True)
class CokernelClass:
    """Coordinates of a class: residues modulo the invariant factors, then free coordinates."""

    torsion: tuple[tuple[int, int], ...]
    free: tuple[int, ...]

    def is_zero(self) -> bool:
        return all(r == 0 for r, _ in self.torsion) and all(f == 0 for f in self.free)

    def to_json(self) -> dict:
        return {"torsion": [[r, d] for r, d in self.torsion], "free": list(self.free)}


def cokernel_class(m: Sequence[Sequence[int]], vector: Sequence[int]) -> CokernelClass:
    res = snf(m)
    y = [sum(res.U[i][j] * int(vector[j]) for j in range(len(vector))) for i in range(len(res.U))]
    diag = res.diagonal
    torsion = tuple((y[i] % d, d) for i, d in enumerate(diag) if d > 1)
    free = tuple(y[i] for i in range(res.rank, len(y)))
    return CokernelClass(torsion, free)


def duality_image(a: AdjacencyMatrix, coeffs: Sequence[int]) -> CokernelClass:
    """Class of sum_j k_j [T_j T_j^*] in K^1(O_A) = coker(1 - A)."""
    if len(coeffs) != a.n:
        raise ValueError(f"expected {a.n} coefficients, got {len(coeffs)}")
    return cokernel_class(one_minus(a), coeffs)


def class_order(cls: CokernelClass) -> int | str:
    if any(cls.free):
        return INFINITE
    return math.lcm(1, *(d // math.gcd(r, d) for r, d in cls.torsion))


def unit_class_order(a: AdjacencyMatrix) -> int | str:
    return class_order(duality_image(a, [1] * a.n))


# ---------------------------------------------------------------- fixed point algebra systems


@dataclass(frozen=True)
class LimitDescriptor:
    system: str
    stage_groups: tuple[FGAbelianGroup, ...]
    ranks: tuple[int, ...]
    eventual_rank: int
    stabilized: bool

    def to_json(self) -> dict:
        return {
            "system": self.system,
            "stage_cokernels": [g.to_json() for g in self.stage_groups],
            "ranks": list(self.ranks),
            "eventual_rank": self.eventual_rank,
            "stabilized": self.stabilized,
        }


def _descriptor(m: IntMatrix, stages: int, label: str) -> LimitDescriptor:
    n = len(m)
    groups, ranks = [], []
    power = _identity(n)
    for _ in range(max(stages, n + 1)):
        power = matmul(power, m)
        res = snf(power)
        ranks.append(res.rank)
        groups.append(FGAbelianGroup(n - res.rank, res.invariant_factors()))
    eventual = ranks[n - 1] if n else 0
    stabilized = all(r == eventual for r in ranks[n - 1:])
    return LimitDescriptor(label, tuple(groups[:stages]), tuple(ranks[:stages]), eventual, stabilized)


def fixed_point_descriptors(a: AdjacencyMatrix, stages: int) -> tuple[LimitDescriptor, LimitDescriptor]:
    """Stage data for the inductive system (Z^N, A^T) and the projective system (Z^N, A)."""
    if stages < 1:
        raise ValueError("stages must be at least 1")
    at = [[int(x) for x in row] for row in a.array.T]
    am = [[int(x) for x in row] for row in a.array]
    return _descriptor(at, stages, "colim A^T"), _descriptor(am, stages, "lim A")


# ---------------------------------------------------------------- Pimsner-Voiculescu consistency


@dataclass(frozen=True)
class PVReport:
    invertible: bool
    exact: bool | None
    euler_consistent: bool
    det_one_minus_A: int
    det_A: int
    core_det_A: int
    torsion_matches_det: bool | None
    localization_consistent: bool
    groups: KGroups

    def to_json(self) -> dict:
        return {
            "invertible_over_Z": self.invertible,
            "exact": self.exact,
            "euler_consistent": self.euler_consistent,
            "det_one_minus_A": self.det_one_minus_A,
            "det_A": self.det_A,
            "core_det_A": self.core_det_A,
            "torsion_matches_det": self.torsion_matches_det,
            "localization_consistent": self.localization_consistent,
            "groups": self.groups.to_json(),
        }


def pv_consistency(a: AdjacencyMatrix, require_exact: bool = False) -> PVReport:
    """Check the K-homology groups against the sequence 0 -> K^0 -> Z^N -> Z^N -> K^1 -> 0.

    When A is invertible over Z the fixed point algebra has K^0 = Z^N at every
    stage and the middle map is 1 - A itself, so exactness is a direct
    kernel/cokernel comparison. Otherwise only rank and torsion bookkeeping
    is performed: the Euler characteristic, the torsion order against
    |det(1 - A)|, and whether inverting the primes of the nonzero eigenvalue
    product of A (which is what passing to the limit does) leaves the torsion
    untouched.
    """
    groups = k_groups(a)
    m = one_minus(a)
    dm = det(m)
    da = det([[int(x) for x in row] for row in a.array])
    invertible = abs(da) == 1
    if require_exact and not invertible:
        raise ContractNotApplicable(f"det A = {da}; exactness needs det A = +-1")
    euler = groups.K0_hom.free_rank - groups.K1_hom.free_rank == 0
    torsion_ok = None if dm == 0 else groups.K1_hom.torsion_order == abs(dm)
    core = core_determinant([[int(x) for x in row] for row in a.array])
    local = all(math.gcd(d, core) == 1 for d in groups.K1_hom.invariant_factors)
    exact = None
    if invertible:
        exact = kernel(m) == groups.K0_hom and cokernel(m) == groups.K1_hom
    return PVReport(invertible, exact, euler, dm, da, core, torsion_ok, local, groups)
