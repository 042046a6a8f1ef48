"""Run configuration for the command line and the experiment scripts."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .sft_core import AdjacencyMatrix, InvalidMatrix, Point, Word, matrix_from_json, parse_word

FORMATS = ("json", "csv", "text")


class ConfigError(ValueError):
    """A parameter is missing or out of range; ``flag`` names the offending option."""

    def __init__(self, flag: str, message: str):
        super().__init__(f"{flag}: {message}")
        self.flag = flag


class MatrixFileError(ValueError):
    def __init__(self, path: str, message: str, line: int | None = None):
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


@dataclass(frozen=True)
class Tolerances:
    perron: float = 1e-12
    assertion: float = 1e-12
    quad: float = 1e-10

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if not (0.0 < value < 1.0):
                raise ConfigError("--tol", f"{name} tolerance {value} must lie in (0, 1)")


@dataclass(frozen=True)
class RunConfig:
    matrix_path: str | None = None
    depth: int = 5
    fiber_bounds: tuple[int, int] = (5, 3)
    s: float = 0.5
    lam: Word = ()
    omega: Point | None = None
    tau: str = "auto"
    tolerances: Tolerances = field(default_factory=Tolerances)
    format: str = "json"
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.depth <= 16:
            raise ConfigError("--depth", f"{self.depth} is outside 0..16")
        m, k = self.fiber_bounds
        if not (0 <= m <= 12 and 0 <= k <= 12):
            raise ConfigError("--fiber-bounds", f"{self.fiber_bounds} is outside 0..12")
        if not (0.0 < self.s and math.isfinite(self.s)):
            raise ConfigError("--s", f"{self.s} must be positive")
        if self.format not in FORMATS:
            raise ConfigError("--format", f"{self.format} is not one of {', '.join(FORMATS)}")
        if self.seed < 0:
            raise ConfigError("--seed", "must be nonnegative")

    def to_json(self) -> dict:
        return {
            "matrix_path": self.matrix_path,
            "depth": self.depth,
            "fiber_bounds": list(self.fiber_bounds),
            "s": self.s,
            "lambda": [x + 1 for x in self.lam],
            "omega": None if self.omega is None else self.omega.to_json(),
            "tau": self.tau,
            "tolerances": asdict(self.tolerances),
            "format": self.format,
            "seed": self.seed,
        }


def load_matrix(path: str | Path) -> AdjacencyMatrix:
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise MatrixFileError(path, exc.strerror or str(exc)) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MatrixFileError(path, f"invalid JSON ({exc.msg}, column {exc.colno})", exc.lineno) from exc
    try:
        return matrix_from_json(data)
    except InvalidMatrix as exc:
        raise MatrixFileError(path, str(exc)) from exc


def parse_bounds(text: str) -> tuple[int, int]:
    try:
        m, k = (int(x) for x in text.split(","))
    except ValueError as exc:
        raise ConfigError("--fiber-bounds", f"expected two integers M,K, got {text!r}") from exc
    return m, k


def parse_word_option(text: str, a: AdjacencyMatrix | None = None, flag: str = "--lambda") -> Word:
    try:
        word = parse_word(text)
    except ValueError as exc:
        raise ConfigError(flag, str(exc)) from exc
    if any(x < 0 for x in word) or (a is not None and any(x >= a.n for x in word)):
        raise ConfigError(flag, f"{text} uses a letter outside the alphabet")
    if a is not None and not a.is_admissible(word):
        raise ConfigError(flag, f"{text} is not admissible")
    return word


def parse_omega(text: str, a: AdjacencyMatrix | None = None) -> Point:
    try:
        point = Point.from_json(json.loads(text))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError("--omega", f'expected {{"preperiod": [...], "period": [...]}}, got {text!r}') from exc
    if a is not None and not point.is_admissible(a):
        raise ConfigError("--omega", f"{point} is not admissible")
    return point
