"""Subshifts of finite type: matrices, admissible words, boundary points.

Letters are 0-based everywhere inside the package. The JSON helpers at the
bottom translate from and to the 1-based convention used in files and on the
command line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

Word = tuple[int, ...]
EMPTY: Word = ()

DEFAULT_WORD_CAP = 2_000_000


class InvalidMatrix(ValueError):
    """Base class for adjacency matrix validation failures.

    ``problems`` lists every defect found, not only the first one.
    """

    def __init__(self, message: str, problems: Sequence["InvalidMatrix"] = ()):
        super().__init__(message)
        self.problems = list(problems) or [self]


class NonBinaryEntry(InvalidMatrix):
    def __init__(self, row: int, col: int, value: object):
        super().__init__(f"entry ({row}, {col}) is {value!r}, expected 0 or 1")
        self.row, self.col, self.value = row, col, value


class ZeroRow(InvalidMatrix):
    def __init__(self, index: int):
        super().__init__(f"row {index} is zero")
        self.index = index


class ZeroColumn(InvalidMatrix):
    def __init__(self, index: int):
        super().__init__(f"column {index} is zero")
        self.index = index


class BlowupGuard(RuntimeError):
    def __init__(self, estimated_size: int, cap: int):
        super().__init__(f"enumeration would produce {estimated_size} items, cap is {cap}")
        self.estimated_size = estimated_size
        self.cap = cap


class EmptyWord(ValueError):
    pass


class InadmissibleWord(ValueError):
    pass


@dataclass(frozen=True)
class AdjacencyMatrix:
    """A validated square 0/1 matrix with no zero row or column."""

    rows: tuple[tuple[int, ...], ...]

    @property
    def n(self) -> int:
        return len(self.rows)

    @cached_property
    def array(self) -> np.ndarray:
        arr = np.array(self.rows, dtype=np.int64)
        arr.setflags(write=False)
        return arr

    @cached_property
    def col_sums(self) -> tuple[int, ...]:
        return tuple(int(s) for s in self.array.sum(axis=0))

    @cached_property
    def row_sums(self) -> tuple[int, ...]:
        return tuple(int(s) for s in self.array.sum(axis=1))

    @cached_property
    def followers(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(j for j in range(self.n) if self.rows[i][j]) for i in range(self.n))

    def allowed(self, i: int, j: int) -> bool:
        return bool(self.rows[i][j])

    def is_admissible(self, word: Sequence[int]) -> bool:
        if any(not 0 <= a < self.n for a in word):
            return False
        return all(self.rows[a][b] for a, b in zip(word, word[1:]))

    def check_word(self, word: Sequence[int]) -> Word:
        w = tuple(word)
        if not self.is_admissible(w):
            raise InadmissibleWord(f"{format_word(w)} is not admissible")
        return w

    def transpose(self) -> "AdjacencyMatrix":
        return AdjacencyMatrix(tuple(zip(*self.rows)))

    @cached_property
    def is_irreducible(self) -> bool:
        reach = _reachability(self)
        return bool(reach.all())

    def to_json(self) -> dict:
        return {"n": self.n, "rows": [list(r) for r in self.rows]}


def validate_matrix(raw: Iterable[Iterable[object]]) -> AdjacencyMatrix:
    rows = [list(r) for r in raw]
    n = len(rows)
    if n == 0 or any(len(r) != n for r in rows):
        raise InvalidMatrix("matrix must be square and nonempty")
    problems: list[InvalidMatrix] = []
    clean: list[tuple[int, ...]] = []
    for i, r in enumerate(rows):
        out = []
        for j, v in enumerate(r):
            if isinstance(v, bool) or v not in (0, 1):
                problems.append(NonBinaryEntry(i + 1, j + 1, v))
                out.append(0)
            else:
                out.append(int(v))
        clean.append(tuple(out))
    if not problems:
        for i in range(n):
            if not any(clean[i]):
                problems.append(ZeroRow(i + 1))
        for j in range(n):
            if not any(clean[i][j] for i in range(n)):
                problems.append(ZeroColumn(j + 1))
    if problems:
        first = problems[0]
        first.problems = problems
        raise first
    return AdjacencyMatrix(tuple(clean))


def matrix_from_json(data: object) -> AdjacencyMatrix:
    """Read the {"n": N, "rows": [[0|1, ...], ...]} format."""
    if not isinstance(data, dict) or "rows" not in data:
        raise InvalidMatrix('expected an object with a "rows" field')
    matrix = validate_matrix(data["rows"])
    if "n" in data and data["n"] != matrix.n:
        raise InvalidMatrix(f'"n" is {data["n"]} but there are {matrix.n} rows')
    return matrix


def _reachability(a: AdjacencyMatrix) -> np.ndarray:
    """reach[i, j] is True when some nonempty path leads from i to j."""
    reach = a.array.astype(bool)
    for k in range(a.n):
        reach = reach | (reach[:, [k]] & reach[[k], :])
    return reach


# ---------------------------------------------------------------- standard matrices


def full_shift(n: int) -> AdjacencyMatrix:
    """The all-ones matrix, whose algebra is the Cuntz algebra on n generators."""
    return validate_matrix(np.ones((n, n), dtype=int).tolist())


def quantum_su2() -> AdjacencyMatrix:
    return validate_matrix([[1, 1], [0, 1]])


def free_group(d: int) -> AdjacencyMatrix:
    """Boundary of the free group on d generators.

    Letters come in pairs (g, g^-1); a letter may be followed by anything
    except its own inverse.
    """
    size = 2 * d
    m = np.ones((size, size), dtype=int)
    for g in range(d):
        m[2 * g, 2 * g + 1] = 0
        m[2 * g + 1, 2 * g] = 0
    return validate_matrix(m.tolist())


def almost_free(d: int) -> AdjacencyMatrix:
    """All-ones matrix on 2d letters with the diagonal removed."""
    size = 2 * d
    return validate_matrix((np.ones((size, size), dtype=int) - np.eye(size, dtype=int)).tolist())


# ---------------------------------------------------------------- words


def format_word(word: Sequence[int]) -> str:
    return "".join(str(a + 1) for a in word) if word else "∘"


def parse_word(text: str) -> Word:
    """Parse "12", "1,2" or "" (empty word) into 0-based letters."""
    text = text.strip()
    if text in ("", "∘", "o", "empty"):
        return EMPTY
    parts = text.split(",") if "," in text else list(text)
    return tuple(int(p) - 1 for p in parts)


def word_key(word: Sequence[int]) -> tuple[int, tuple[int, ...]]:
    """Sort key: length first, then lexicographic."""
    return (len(word), tuple(word))


def shift_word(word: Word) -> Word:
    if not word:
        raise EmptyWord("cannot shift the empty word")
    return word[1:]


def count_words(a: AdjacencyMatrix, length: int) -> int:
    """phi(length): exact count of admissible words, via integer matrix powers."""
    if length == 0:
        return 1
    power = np.eye(a.n, dtype=object)
    base = a.array.astype(object)
    for _ in range(length - 1):
        power = power.dot(base)
    return int(sum(int(x) for x in power.flat))


@dataclass(frozen=True)
class WordTable:
    depth: int
    words_by_length: tuple[tuple[Word, ...], ...]

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(len(ws) for ws in self.words_by_length)

    def __iter__(self) -> Iterator[Word]:
        for ws in self.words_by_length:
            yield from ws

    def __len__(self) -> int:
        return sum(self.counts)

    def of_length(self, length: int) -> tuple[Word, ...]:
        return self.words_by_length[length]


def enumerate_words(a: AdjacencyMatrix, depth: int, cap: int = DEFAULT_WORD_CAP) -> WordTable:
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    estimate = sum(count_words(a, k) for k in range(depth + 1))
    if estimate > cap:
        raise BlowupGuard(estimate, cap)
    levels: list[tuple[Word, ...]] = [(EMPTY,)]
    if depth >= 1:
        levels.append(tuple((i,) for i in range(a.n)))
    for _ in range(2, depth + 1):
        nxt = [w + (j,) for w in levels[-1] for j in a.followers[w[-1]]]
        levels.append(tuple(sorted(nxt)))
    return WordTable(depth, tuple(levels))


def words_up_to(a: AdjacencyMatrix, depth: int, cap: int = DEFAULT_WORD_CAP) -> list[Word]:
    return list(enumerate_words(a, depth, cap))


# ---------------------------------------------------------------- boundary points


def _primitive_root(period: Word) -> Word:
    n = len(period)
    for d in range(1, n + 1):
        if n % d == 0 and period[:d] * (n // d) == period:
            return period[:d]
    return period


@dataclass(frozen=True, order=True)
class Point:
    """An eventually periodic infinite word, always stored in canonical form.

    Canonical means the period is primitive and the preperiod is as short as
    possible, so structural equality coincides with equality of sequences.
    """

    preperiod: Word
    period: Word

    def __post_init__(self) -> None:
        if not self.period:
            raise ValueError("period must be nonempty")
        pre, per = tuple(self.preperiod), _primitive_root(tuple(self.period))
        while pre and pre[-1] == per[-1]:
            per = (per[-1],) + per[:-1]
            pre = pre[:-1]
        object.__setattr__(self, "preperiod", pre)
        object.__setattr__(self, "period", per)

    def letter(self, index: int) -> int:
        """0-based access: letter(0) is the first letter."""
        if index < len(self.preperiod):
            return self.preperiod[index]
        return self.period[(index - len(self.preperiod)) % len(self.period)]

    def first(self) -> int:
        return self.letter(0)

    def prefix(self, length: int) -> Word:
        return tuple(self.letter(i) for i in range(length))

    def shift(self, times: int = 1) -> "Point":
        if times < 0:
            raise ValueError("shift count must be nonnegative")
        pre, per = self.preperiod, self.period
        if times <= len(pre):
            return Point(pre[times:], per)
        r = (times - len(pre)) % len(per)
        return Point(EMPTY, per[r:] + per[:r])

    def prepend(self, word: Sequence[int]) -> "Point":
        return Point(tuple(word) + self.preperiod, self.period)

    def in_cylinder(self, word: Sequence[int]) -> bool:
        return self.prefix(len(word)) == tuple(word)

    def is_admissible(self, a: AdjacencyMatrix) -> bool:
        letters = self.preperiod + self.period + self.period[:1]
        return a.is_admissible(letters)

    def scan_bound(self, other: "Point") -> int:
        return len(self.preperiod) + len(other.preperiod) + math.lcm(len(self.period), len(other.period))

    def to_json(self) -> dict:
        return {"preperiod": [a + 1 for a in self.preperiod], "period": [a + 1 for a in self.period]}

    @classmethod
    def from_json(cls, data: dict) -> "Point":
        return cls(tuple(int(a) - 1 for a in data.get("preperiod", [])), tuple(int(a) - 1 for a in data["period"]))

    def __str__(self) -> str:
        pre = format_word(self.preperiod) if self.preperiod else ""
        return f"{pre}({format_word(self.period)})^∞"


def constant_point(letter: int) -> Point:
    return Point(EMPTY, (letter,))


def shift_point(x: Point) -> Point:
    return x.shift(1)


def metric_distance(x: Point, y: Point) -> float:
    """exp(-n) where n is the first (1-based) position at which x and y differ."""
    if x == y:
        return 0.0
    for i in range(x.scan_bound(y) + 1):
        if x.letter(i) != y.letter(i):
            return math.exp(-(i + 1))
    raise AssertionError("distinct canonical points must differ within the scan bound")


# ---------------------------------------------------------------- structural predicates


def delta_A(a: AdjacencyMatrix, tol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Log of the spectral radius (the Poincaré-series threshold)."""
    from .measure import spectral_radius

    return math.log(spectral_radius(a, tol=tol, max_iter=max_iter))


@dataclass(frozen=True)
class ConditionIReport:
    holds: bool
    witnesses: dict[int, tuple[Word, Word, Word]] = field(default_factory=dict)
    failing_letter: int | None = None


def _loops_at(a: AdjacencyMatrix, base: int, max_len: int, want: int = 2) -> list[Word]:
    """First-return loops at ``base`` (words base...base with no interior base)."""
    found: list[Word] = []
    frontier: list[Word] = [(base,)]
    for _ in range(max_len):
        nxt: list[Word] = []
        for w in frontier:
            for j in a.followers[w[-1]]:
                if j == base:
                    found.append(w + (base,))
                    if len(found) >= want:
                        return found
                else:
                    nxt.append(w + (j,))
        frontier = nxt
        if not frontier:
            break
    return found


def condition_I(a: AdjacencyMatrix) -> ConditionIReport:
    """Every letter must reach a letter carrying two distinct first-return loops.

    Loop search length is bounded by the number of letters: a first-return
    loop that avoids repeating interior letters has length at most n, and two
    distinct first-return loops exist iff two exist among those of length
    at most 2n.
    """
    n = a.n
    rich: dict[int, tuple[Word, Word]] = {}
    for j in range(n):
        loops = _loops_at(a, j, 2 * n)
        if len(loops) >= 2:
            rich[j] = (loops[0], loops[1])
    witnesses: dict[int, tuple[Word, Word, Word]] = {}
    for start in range(n):
        path = _shortest_path_to(a, start, set(rich))
        if path is None:
            return ConditionIReport(False, witnesses, failing_letter=start)
        target = path[-1]
        witnesses[start] = (path, *rich[target])
    return ConditionIReport(True, witnesses)


def _shortest_path_to(a: AdjacencyMatrix, start: int, targets: set[int]) -> Word | None:
    if start in targets:
        return (start,)
    seen = {start}
    frontier: list[Word] = [(start,)]
    while frontier:
        nxt = []
        for w in frontier:
            for j in a.followers[w[-1]]:
                if j in targets:
                    return w + (j,)
                if j not in seen:
                    seen.add(j)
                    nxt.append(w + (j,))
        frontier = nxt
    return None


def is_minimal_word(a: AdjacencyMatrix, word: Sequence[int]) -> bool:
    """True when no proper nonempty prefix spans the same cylinder.

    Cylinders of a prefix and an extension agree exactly when every added
    letter is the unique follower of its predecessor, so it suffices to look
    at the last letter.
    """
    w = a.check_word(word)
    if len(w) <= 1:
        return True
    return len(a.followers[w[-2]]) > 1


def longest_minimal_prefix(a: AdjacencyMatrix, word: Sequence[int]) -> Word:
    """The shortest prefix of ``word`` spanning the same cylinder, which is its longest minimal prefix."""
    w = a.check_word(word)
    end = len(w)
    while end > 1 and len(a.followers[w[end - 2]]) == 1:
        end -= 1
    return w[:end]


def same_cylinder(a: AdjacencyMatrix, shorter: Sequence[int], longer: Sequence[int]) -> bool:
    s, l = tuple(shorter), tuple(longer)
    if l[: len(s)] != s:
        return False
    if not s:
        return not l
    return all(len(a.followers[l[k - 1]]) == 1 for k in range(len(s), len(l)))


def follower_orbit_point(a: AdjacencyMatrix, word: Word, pick_max: bool = False) -> Point:
    """Extend ``word`` forever by repeatedly appending the smallest (or largest) follower."""
    if not word:
        start = a.n - 1 if pick_max else 0
        return follower_orbit_point(a, (start,), pick_max)
    choose = max if pick_max else min
    tail = [word[-1]]
    index = {word[-1]: 0}
    while True:
        nxt = choose(a.followers[tail[-1]])
        if nxt in index:
            cut = index[nxt]
            return Point(tuple(word[:-1]) + tuple(tail[:cut]), tuple(tail[cut:]))
        index[nxt] = len(tail)
        tail.append(nxt)
