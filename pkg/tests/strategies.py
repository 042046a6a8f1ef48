"""Hypothesis strategies for matrices, words and points."""

from hypothesis import strategies as st

from ckalg.sft_core import AdjacencyMatrix, InvalidMatrix, Point, validate_matrix


@st.composite
def matrices(draw, min_n: int = 1, max_n: int = 4) -> AdjacencyMatrix:
    n = draw(st.integers(min_n, max_n))
    rows = draw(st.lists(st.lists(st.integers(0, 1), min_size=n, max_size=n), min_size=n, max_size=n))
    for i in range(n):
        rows[i][(i + 1) % n] = 1  # a cycle through all letters: no zero row or column, irreducible
    return validate_matrix(rows)


@st.composite
def any_matrices(draw, max_n: int = 4) -> AdjacencyMatrix:
    """Valid but possibly reducible matrices."""
    n = draw(st.integers(1, max_n))
    rows = draw(st.lists(st.lists(st.integers(0, 1), min_size=n, max_size=n), min_size=n, max_size=n))
    try:
        return validate_matrix(rows)
    except InvalidMatrix:
        return validate_matrix([[1] * n for _ in range(n)])


@st.composite
def words(draw, a: AdjacencyMatrix, min_size: int = 0, max_size: int = 5) -> tuple[int, ...]:
    length = draw(st.integers(min_size, max_size))
    if length == 0:
        return ()
    w = [draw(st.integers(0, a.n - 1))]
    while len(w) < length:
        w.append(draw(st.sampled_from(a.followers[w[-1]])))
    return tuple(w)


@st.composite
def points(draw, a: AdjacencyMatrix, max_pre: int = 3) -> Point:
    """Eventually periodic admissible points: a word followed by a closed walk."""
    pre = draw(words(a, 0, max_pre))
    start = pre[-1] if pre else draw(st.integers(0, a.n - 1))
    # walk until a letter repeats, then close the loop at that letter
    walk = [draw(st.sampled_from(a.followers[start]))] if pre else [start]
    while walk.count(walk[-1]) == 1:
        walk.append(draw(st.sampled_from(a.followers[walk[-1]])))
    first = walk.index(walk[-1])
    return Point(tuple(pre) + tuple(walk[:first]), tuple(walk[first:-1]))
