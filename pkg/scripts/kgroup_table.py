"""Print the K-theory and K-homology groups for full shifts and the shipped matrices.

    python scripts/kgroup_table.py --max-n 8
"""

from __future__ import annotations

import argparse
from pathlib import Path

from ckalg.config import load_matrix
from ckalg.ktheory import k_groups, pv_consistency, unit_class_order
from ckalg.sft_core import full_shift

DATA = Path(__file__).resolve().parents[1] / "data" / "matrices"


def rows(max_n: int):
    cases = [(f"full shift {n}", full_shift(n)) for n in range(2, max_n + 1)]
    cases += [(p.stem, load_matrix(p)) for p in sorted(DATA.glob("*.json"))]
    for name, a in cases:
        g = k_groups(a)
        pv = pv_consistency(a)
        yield name, str(g.K0), str(g.K1), str(g.K0_hom), str(g.K1_hom), str(unit_class_order(a)), str(pv.det_one_minus_A)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--max-n", type=int, default=6)
    args = parser.parse_args()
    header = ("matrix", "K_0", "K_1", "K^0", "K^1", "order [1]", "det(1-A)")
    table = [header, *rows(args.max_n)]
    widths = [max(len(r[c]) for r in table) for c in range(len(header))]
    for r in table:
        print("  ".join(x.ljust(w) for x, w in zip(r, widths)))


if __name__ == "__main__":
    main()
