"""The ``ck`` command line.

Exit codes: 0 success, 1 verification failure, 2 usage or input error,
3 resource guard (an enumeration would exceed the size cap).
Every JSON report carries the truncation parameters it was computed with,
and identical arguments give byte-identical JSON.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from pathlib import Path
from typing import Callable

import click
import numpy as np

from . import __version__
from .bp_triples import ChoicePair, construct_tau_for, index_pairing, make_default_pair, pairing_trace
from .config import (
    FORMATS,
    ConfigError,
    MatrixFileError,
    RunConfig,
    Tolerances,
    load_matrix,
    parse_bounds,
    parse_omega,
    parse_word_option,
)
from .groupoid import UNIT, a_lambda_bound, fiber_csv
from .ktheory import cokernel, k_groups, one_minus, pv_consistency, unit_class_order
from .measure import ConformalMeasure
from .operators import build_fiber_rep, commutator_norm_bound_check
from .product import (
    ProductBounds,
    build_product,
    chi_structure_check,
    connection_commutator_report,
    epsilon_bound_check,
    rational_class_report,
    symmetry_defect,
)
from .sft_core import (
    AdjacencyMatrix,
    BlowupGuard,
    InadmissibleWord,
    condition_I,
    count_words,
    delta_A,
    format_word,
    validate_matrix,
)
from .suite import CheckResult, run_suite, sample_points

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_GUARD = 0, 1, 2, 3


def _word_json(word) -> list[int]:
    return [x + 1 for x in word]


def _dump(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False, default=str)


def _flatten(prefix: str, value, rows: list[tuple[str, str]]) -> None:
    if isinstance(value, dict):
        for k in sorted(value):
            _flatten(f"{prefix}.{k}" if prefix else str(k), value[k], rows)
    elif isinstance(value, list) and value and all(isinstance(x, dict) for x in value):
        for i, x in enumerate(value):
            _flatten(f"{prefix}[{i}]", x, rows)
    else:
        rows.append((prefix, json.dumps(value, ensure_ascii=False, default=str) if not isinstance(value, str) else value))


def _table_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return buf.getvalue()


def emit(report: dict, fmt: str, out: str | None, tables: dict[str, str] | None = None) -> None:
    """Print the report and, with --out, write report.json plus one CSV per table."""
    tables = tables or {}
    if fmt == "json":
        click.echo(_dump(report))
    elif fmt == "text":
        rows: list[tuple[str, str]] = []
        _flatten("", report, rows)
        width = max((len(k) for k, _ in rows), default=0)
        for k, v in rows:
            click.echo(f"{k.ljust(width)}  {v}")
    else:
        if tables:
            click.echo(next(iter(tables.values())), nl=False)
        else:
            rows = []
            _flatten("", report, rows)
            click.echo(_table_csv([{"key": k, "value": v} for k, v in rows]), nl=False)
    if out is not None:
        target = Path(out)
        target.mkdir(parents=True, exist_ok=True)
        (target / f"{report['command']}.json").write_text(_dump(report) + "\n")
        for name, text in tables.items():
            (target / f"{name}.csv").write_text(text)


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def guarded(fn: Callable) -> Callable:
    """Map library exceptions onto the documented exit codes."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigError, MatrixFileError, InadmissibleWord) as exc:
            _fail(EXIT_USAGE, str(exc))
        except BlowupGuard as exc:
            _fail(EXIT_GUARD, str(exc))

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def matrix_option(fn: Callable) -> Callable:
    return click.option("--matrix", "matrix_path", required=True, type=click.Path(dir_okay=False), help="Matrix JSON file.")(fn)


def output_options(fn: Callable) -> Callable:
    fn = click.option("--out", type=click.Path(file_okay=False), default=None, help="Directory for report.json and CSV exports.")(fn)
    fn = click.option("--format", "fmt", type=click.Choice(FORMATS), default="json", show_default=True)(fn)
    fn = click.option("--seed", type=int, default=0, show_default=True, help="Seed for randomized checks.")(fn)
    fn = click.option("--tol", type=float, default=1e-12, show_default=True, help="Assertion tolerance for float checks.")(fn)
    return fn


def _tau_pair(a: AdjacencyMatrix, tau: str) -> ChoicePair:
    if tau == "auto":
        return make_default_pair(a)
    try:
        data = json.loads(Path(tau).read_text())
        return ChoicePair.from_json(a, data)
    except OSError as exc:
        raise ConfigError("--tau", f"cannot read {tau}: {exc.strerror}") from exc
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError("--tau", f"{tau} is not a choice pair file: {exc}") from exc


@click.group()
@click.version_option(__version__, prog_name="ck")
def main() -> None:
    """Finite-truncation computations for Cuntz-Krieger algebras."""


# ---------------------------------------------------------------- analyze


@main.command()
@matrix_option
@click.option("--depth", type=int, default=6, show_default=True)
@output_options
@guarded
def analyze(matrix_path, depth, tol, seed, fmt, out):
    """Word counts, entropy, irreducibility and condition (I)."""
    config = RunConfig(matrix_path=matrix_path, depth=depth, format=fmt, seed=seed, tolerances=Tolerances(perron=tol))
    a = load_matrix(matrix_path)
    cond = condition_I(a)
    warnings = []
    if not a.is_irreducible:
        warnings.append("matrix is reducible")
    if not cond.holds:
        warnings.append(f"condition (I) fails at letter {cond.failing_letter + 1}")
    phi = [count_words(a, k) for k in range(depth + 1)]
    report = {
        "command": "analyze",
        "config": config.to_json(),
        "matrix": a.to_json(),
        "n": a.n,
        "depth": depth,
        "phi": phi,
        "delta": delta_A(a, tol=config.tolerances.perron),
        "irreducible": a.is_irreducible,
        "condition_I": {
            "holds": cond.holds,
            "failing_letter": None if cond.failing_letter is None else cond.failing_letter + 1,
            "witnesses": {
                str(letter + 1): {"path": _word_json(p), "loops": [_word_json(l1), _word_json(l2)]}
                for letter, (p, l1, l2) in sorted(cond.witnesses.items())
            },
        },
        "purely_infinite": cond.holds,
        "warnings": warnings,
    }
    if a.is_irreducible:
        report["measure"] = ConformalMeasure.of(a, config.tolerances.perron).report(min(depth, 4) or 1)
    for w in warnings:
        click.echo(f"warning: {w}", err=True)
    emit(report, fmt, out, {"phi": _table_csv([{"length": k, "count": c} for k, c in enumerate(phi)])})


# ---------------------------------------------------------------- kgroups


@main.command()
@matrix_option
@output_options
@guarded
def kgroups(matrix_path, tol, seed, fmt, out):
    """K-theory and K-homology groups from Smith normal forms."""
    a = load_matrix(matrix_path)
    groups = k_groups(a)
    pv = pv_consistency(a)
    report = {
        "command": "kgroups",
        "matrix": a.to_json(),
        "groups": groups.to_json(),
        "display": {"K0": str(groups.K0), "K1": str(groups.K1), "K^0": str(groups.K0_hom), "K^1": str(groups.K1_hom)},
        "unit_class_order": unit_class_order(a),
        "pv_consistency": pv.to_json(),
    }
    rows = [
        {"group": name, "free_rank": g.free_rank, "torsion": " ".join(map(str, g.invariant_factors))}
        for name, g in (("K0", groups.K0), ("K1", groups.K1), ("K^0", groups.K0_hom), ("K^1", groups.K1_hom))
    ]
    emit(report, fmt, out, {"kgroups": _table_csv(rows)})


# ---------------------------------------------------------------- pairing


@main.command()
@matrix_option
@click.option("--mu", required=True, help='Word such as "12" or "1,2".')
@click.option("--tau", default="auto", show_default=True, help="auto, or a choice pair JSON file.")
@click.option("--depth", type=int, default=None, help="Trace depth; defaults to |mu|.")
@output_options
@guarded
def pairing(matrix_path, mu, tau, depth, tol, seed, fmt, out):
    """Index pairing of a choice pair with the cylinder projection of mu."""
    a = load_matrix(matrix_path)
    word = parse_word_option(mu, a, "--mu")
    if not word:
        raise ConfigError("--mu", "the word must be nonempty")
    pair = construct_tau_for(a, word) if tau == "auto" else _tau_pair(a, tau)
    depth = len(word) if depth is None else depth
    if depth < len(word):
        raise ConfigError("--depth", f"must be at least |mu| = {len(word)}")
    RunConfig(matrix_path=matrix_path, depth=depth, tau=tau, format=fmt, seed=seed)
    violations = pair.plus.cylinder_violations(depth) + pair.minus.cylinder_violations(depth)
    value = index_pairing(pair, word, depth)
    report = {
        "command": "pairing",
        "matrix": a.to_json(),
        "mu": _word_json(word),
        "depth": depth,
        "tau": pair.to_json(),
        "tau_source": tau,
        "pairing": value,
        "trace": pairing_trace(pair, word, depth),
        "cylinder_violations": [_word_json(w) for w in violations],
    }
    emit(report, fmt, out)
    if violations:
        _fail(EXIT_FAILED, f"choice pair leaves its cylinder at {format_word(violations[0])}")


# ---------------------------------------------------------------- fiber


@main.command()
@matrix_option
@click.option("--omega", default=None, help='Base point, e.g. \'{"preperiod":[1],"period":[2]}\'.')
@click.option("--lambda", "lam", default="", help='Word such as "1,2"; empty by default.')
@click.option("--fiber-bounds", default="5,3", show_default=True, help="Prefix length and cut bounds M,K.")
@output_options
@guarded
def fiber(matrix_path, omega, lam, fiber_bounds, tol, seed, fmt, out):
    """Spectrum, kernel, phase identity and commutator norms of the fiber operator."""
    a = load_matrix(matrix_path)
    word = parse_word_option(lam, a)
    base = parse_omega(omega, a) if omega else sample_points(a)[0]
    bounds = parse_bounds(fiber_bounds)
    config = RunConfig(matrix_path=matrix_path, fiber_bounds=bounds, lam=word, omega=base, format=fmt, seed=seed)
    rep = build_fiber_rep(a, base, word, *bounds)
    values, counts = np.unique(rep.psi.astype(int), return_counts=True)
    bound = a_lambda_bound(word)
    norms = [commutator_norm_bound_check(rep, i) for i in range(a.n)]
    report = {
        "command": "fiber",
        "config": config.to_json(),
        "matrix": a.to_json(),
        "omega": base.to_json(),
        "lambda": _word_json(word),
        "fiber_bounds": list(bounds),
        "dimension": len(rep.basis),
        "spectrum": [[int(v), int(c)] for v, c in zip(values, counts)],
        "kernel": [e.to_json() for e in rep.kernel_labels()],
        "kernel_is_unit": rep.kernel_labels() == [UNIT],
        "phase_defect": rep.phase_defect(),
        "w_rank": rep.w_rank(),
        "commutator_norms": norms,
        "commutator_bound": bound,
    }
    emit(report, fmt, out, {"fiber": fiber_csv(rep.basis.labels, base, word)})


# ---------------------------------------------------------------- product


@main.command()
@matrix_option
@click.option("--s", "s", type=float, default=0.5, show_default=True)
@click.option("--lambda", "lam", default="")
@click.option("--depth", type=int, default=4, show_default=True, help="Longest word v.")
@click.option("--fiber-bounds", default="4,4", show_default=True, help="Prefix length and cut bounds M,K.")
@click.option("--tau", default="auto", show_default=True)
@output_options
@guarded
def product(matrix_path, s, lam, depth, fiber_bounds, tau, tol, seed, fmt, out):
    """The product operator: structure relations, connection commutator and epsilon bounds."""
    a = load_matrix(matrix_path)
    word = parse_word_option(lam, a)
    m, k = parse_bounds(fiber_bounds)
    config = RunConfig(matrix_path=matrix_path, depth=depth, fiber_bounds=(m, k), s=s, lam=word, tau=tau, format=fmt, seed=seed)
    pair = _tau_pair(a, tau)
    bounds = ProductBounds(m, depth, k)
    model = build_product(a, word, pair, s, bounds)
    per_letter = []
    for i in range(a.n):
        c = connection_commutator_report(model, i)
        e = epsilon_bound_check(model, i)
        per_letter.append({**c.to_json(), **e.to_json()})
    report = {
        "command": "product",
        "config": config.to_json(),
        "matrix": a.to_json(),
        "bounds": bounds.to_json(),
        "s": s,
        "lambda": _word_json(word),
        "dimension": len(model.basis),
        "symmetry_defect": symmetry_defect(model),
        "structure": chi_structure_check(model).to_json(),
        "redcomm_defect": max(x["formula_defect"] for x in per_letter),
        "epsilon_bound_left": max(x["epsilon_bound_left"] for x in per_letter),
        "epsilon_bound_right": max(x["epsilon_bound_right"] for x in per_letter),
        "letters": per_letter,
        "class": rational_class_report(a, word, pair).to_json(),
    }
    rows = [
        {"i": x["i"], "epsilon_left": x["epsilon_bound_left"], "epsilon_right": x["epsilon_bound_right"],
         "redcomm_epsilon_left": x["redcomm_epsilon_left"], "redcomm_epsilon_right": x["redcomm_epsilon_right"],
         "formula_defect": x["formula_defect"]}
        for x in per_letter
    ]
    emit(report, fmt, out, {"product": _table_csv(rows)})


# ---------------------------------------------------------------- verify


def _random_duality_checks(seed: int, count: int = 20, size: int = 4) -> CheckResult:
    """coker(1 - A) and coker(1 - A^T) agree on seeded random 0/1 matrices."""
    rng = np.random.default_rng(seed)
    mismatches, tested, where = 0, 0, None
    while tested < count:
        raw = rng.integers(0, 2, size=(size, size))
        try:
            a = validate_matrix(raw.tolist())
        except ValueError:
            continue
        tested += 1
        if cokernel(one_minus(a)) != cokernel(one_minus(a, transpose=True)):
            mismatches += 1
            where = where or json.dumps(a.to_json())
    return CheckResult("snf_duality", float(mismatches), 0.0, mismatches == 0, where, True, {"seed": seed, "matrices": count})


@main.command()
@matrix_option
@click.option("--depth", type=int, default=5, show_default=True)
@click.option("--fiber-bounds", default="5,3", show_default=True)
@click.option("--s", "s", type=float, default=0.5, show_default=True)
@click.option("--tau", default="auto", show_default=True)
@output_options
@guarded
def verify(matrix_path, depth, fiber_bounds, s, tau, tol, seed, fmt, out):
    """Run every identity family; exit 1 and name a counterexample on any failure."""
    a = load_matrix(matrix_path)
    bounds = parse_bounds(fiber_bounds)
    config = RunConfig(matrix_path=matrix_path, depth=depth, fiber_bounds=bounds, s=s, tau=tau, format=fmt, seed=seed)
    pair = _tau_pair(a, tau)
    suite = run_suite(a, depth=depth, fiber_bounds=bounds, s_values=(s,), pair=pair)
    checks = list(suite.checks) + [_random_duality_checks(seed)]
    passed = all(c.passed for c in checks)
    report = {
        "command": "verify",
        "config": config.to_json(),
        "params": dict(suite.params),
        "passed": passed,
        "checks": [c.to_json() for c in checks],
    }
    rows = [{"name": c.name, "value": c.value, "bound": c.bound, "passed": c.passed, "applicable": c.applicable,
             "params": json.dumps(dict(c.params), sort_keys=True, ensure_ascii=False)} for c in checks]
    emit(report, fmt, out, {"verify": _table_csv(rows)})
    if not passed:
        for c in checks:
            if not c.passed:
                click.echo(f"FAILED {c.name} value={c.value:.3e} bound={c.bound:.3e} at {c.witness} {dict(c.params)}", err=True)
        sys.exit(EXIT_FAILED)


if __name__ == "__main__":
    main()
