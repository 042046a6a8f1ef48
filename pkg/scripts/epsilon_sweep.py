"""Sweep the epsilon-bound norms of the connection commutator over truncations and exponents.

Writes one CSV row per (matrix, bounds, s, letter) with the full and the
reduced-term norms on both sides, so the growth of the full norm with the
truncation can be read off directly.

    python scripts/epsilon_sweep.py --matrix data/matrices/o2.json --bounds 3 4 5 --s 0.25 0.5 0.75
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass

from ckalg.bp_triples import make_default_pair
from ckalg.config import load_matrix, parse_word_option
from ckalg.product import ProductBounds, build_product, epsilon_bound_check


@dataclass(frozen=True)
class SweepConfig:
    matrix: str
    bounds: tuple[int, ...] = (3, 4)
    s_values: tuple[float, ...] = (0.25, 0.5, 0.75)
    lam: str = ""


def sweep(cfg: SweepConfig, out) -> None:
    a = load_matrix(cfg.matrix)
    lam = parse_word_option(cfg.lam, a)
    pair = make_default_pair(a)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["matrix", "bound", "s", "letter", "full_left", "full_right", "reduced_left", "reduced_right"])
    for k in cfg.bounds:
        for s in cfg.s_values:
            model = build_product(a, lam, pair, s, ProductBounds(k, k))
            for i in range(a.n):
                e = epsilon_bound_check(model, i)
                writer.writerow([cfg.matrix, k, s, i + 1] + [f"{x:.6f}" for x in (e.left, e.right, e.redcomm_left, e.redcomm_right)])
            out.flush()


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--matrix", required=True)
    parser.add_argument("--bounds", type=int, nargs="+", default=[3, 4])
    parser.add_argument("--s", type=float, nargs="+", default=[0.25, 0.5, 0.75])
    parser.add_argument("--lambda", dest="lam", default="")
    args = parser.parse_args()
    sweep(SweepConfig(args.matrix, tuple(args.bounds), tuple(args.s), args.lam), sys.stdout)


if __name__ == "__main__":
    main()
