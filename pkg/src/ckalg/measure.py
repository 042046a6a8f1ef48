"""Perron data, the conformal measure on cylinders, the KMS state on monomials."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .sft_core import AdjacencyMatrix, InadmissibleWord, Word, enumerate_words


class NoConvergence(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        super().__init__(f"power iteration stalled after {iterations} steps (residual {residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class DegenerateGNS(ValueError):
    """Raised when a normalization constant is infinite (zero-measure follower set)."""


@dataclass(frozen=True)
class PerronData:
    lam: float
    v: tuple[float, ...]
    residual: float
    reducible: bool
    method: str

    @property
    def delta(self) -> float:
        return math.log(self.lam)


def _power_iteration(a: AdjacencyMatrix, tol: float, max_iter: int) -> tuple[float, np.ndarray, float, int]:
    # Shifting by the identity keeps the dominant eigenvalue dominant and
    # removes the oscillation of periodic (imprimitive) matrices.
    shifted = a.array.astype(float) + np.eye(a.n)
    vec = np.full(a.n, 1.0 / a.n)
    mat = a.array.astype(float)
    lam, residual = 0.0, math.inf
    for it in range(1, max_iter + 1):
        nxt = shifted @ vec
        vec = nxt / nxt.sum()
        image = mat @ vec
        lam = float(vec @ image / (vec @ vec))
        residual = float(np.max(np.abs(image - lam * vec)))
        if residual < tol:
            return lam, vec, residual, it
    return lam, vec, residual, max_iter


def perron(a: AdjacencyMatrix, tol: float = 1e-12, max_iter: int = 20_000) -> PerronData:
    """Dominant eigenvalue and right eigenvector (normalized to total mass 1).

    Irreducible matrices go through power iteration. If it stalls on a
    reducible matrix (Jordan blocks make the residual decay only
    algebraically) the dominant eigenpair is taken from a dense solve
    instead and ``method`` records that.
    """
    lam, vec, residual, _ = _power_iteration(a, tol, max_iter)
    reducible = not a.is_irreducible
    if residual < tol:
        return PerronData(lam, tuple(float(x) for x in vec), residual, reducible, "power")
    if not reducible:
        raise NoConvergence(max_iter, residual)
    vals, vecs = np.linalg.eig(a.array.astype(float))
    k = int(np.argmax(vals.real))
    lam = float(vals[k].real)
    vec = np.abs(vecs[:, k].real)
    vec = vec / vec.sum()
    residual = float(np.max(np.abs(a.array @ vec - lam * vec)))
    return PerronData(lam, tuple(float(x) for x in vec), residual, reducible, "dense")


def spectral_radius(a: AdjacencyMatrix, tol: float = 1e-12, max_iter: int = 20_000) -> float:
    return perron(a, tol, max_iter).lam


@dataclass(frozen=True)
class ConformalMeasure:
    matrix: AdjacencyMatrix
    perron: PerronData

    @classmethod
    def of(cls, a: AdjacencyMatrix, tol: float = 1e-12) -> "ConformalMeasure":
        return cls(a, perron(a, tol))

    @cached_property
    def _v(self) -> np.ndarray:
        return np.array(self.perron.v)

    def vol(self, word: Sequence[int]) -> float:
        w = tuple(word)
        if not self.matrix.is_admissible(w):
            raise InadmissibleWord(str(w))
        if not w:
            return 1.0
        return self.perron.lam ** (-(len(w) - 1)) * self.perron.v[w[-1]]

    def follower_mass(self, letter: int) -> float:
        """Sum of vol(C_j) over the followers j of ``letter``."""
        return float(self.matrix.array[letter] @ self._v)

    def c_constant(self, word: Sequence[int]) -> float:
        w = self.matrix.check_word(word)
        if not w:
            return 1.0
        mass = self.follower_mass(w[-1])
        if mass <= 0.0:
            raise DegenerateGNS(f"letter {w[-1] + 1} has followers of total measure zero")
        return mass ** -0.5

    def kms_monomial(self, mu: Sequence[int], nu: Sequence[int]) -> float:
        """The KMS state on S_mu S_nu^*."""
        m, n = self.matrix.check_word(mu), self.matrix.check_word(nu)
        return self.vol(m) if m == n else 0.0

    def modular_function(self, n: int) -> float:
        return math.exp(-self.perron.delta * n)

    def pullback_integral(self, word: Word) -> float:
        """Integral of the transfer operator applied to the indicator of C_word.

        The transfer operator sums over preimages, so L(chi_{C_w})(x) counts
        letters j with j x in C_w. For |w| = 1 that is A(w_1, x_1); for longer
        w it is the indicator of C_{w_2 ... w_k} (admissibility of w supplies
        the A(w_1, w_2) factor).
        """
        if len(word) == 1:
            return sum(self.vol((j,)) for j in self.matrix.followers[word[0]])
        return self.vol(word[1:])

    def conformality_residual(self, depth: int) -> float:
        """Max over cylinders of |∫ L chi dm - e^delta ∫ chi dm|."""
        if depth < 1:
            raise ValueError("depth must be at least 1")
        table = enumerate_words(self.matrix, depth)
        lam = self.perron.lam
        worst = 0.0
        for w in table:
            if not w:
                continue
            worst = max(worst, abs(self.pullback_integral(w) - lam * self.vol(w)))
        return worst

    def report(self, depth: int = 4) -> dict:
        return {
            "lambda": self.perron.lam,
            "delta": self.perron.delta,
            "v": list(self.perron.v),
            "residual": self.perron.residual,
            "conformality_defect": self.conformality_residual(depth),
            "reducible": self.perron.reducible,
            "depth": depth,
        }
