"""Spectrum of the fiber operator and the size of its commutators as the fiber bounds grow.

For each bound pair the script reports the fiber dimension, the multiplicity
of each eigenvalue, the kernel, the phase identity defect and the largest
commutator norm with a generator.

    python scripts/fiber_spectrum.py --matrix data/matrices/suq2.json --lambda 2 --max-bound 6
"""

from __future__ import annotations

import argparse
import json
from collections import Counter

from ckalg.config import load_matrix, parse_omega, parse_word_option
from ckalg.groupoid import a_lambda_bound
from ckalg.operators import build_fiber_rep, commutator_norm_bound_check
from ckalg.suite import sample_points


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--matrix", required=True)
    parser.add_argument("--lambda", dest="lam", default="")
    parser.add_argument("--omega", default=None, help='e.g. \'{"preperiod": [], "period": [2]}\'')
    parser.add_argument("--max-bound", type=int, default=5)
    args = parser.parse_args()

    a = load_matrix(args.matrix)
    lam = parse_word_option(args.lam, a)
    base = parse_omega(args.omega, a) if args.omega else sample_points(a)[0]
    print(f"base point {base}, weight word {args.lam or '(empty)'}, commutator bound {a_lambda_bound(lam)}")
    for k in range(1, args.max_bound + 1):
        rep = build_fiber_rep(a, base, lam, k, k)
        spectrum = dict(sorted(Counter(int(x) for x in rep.psi).items()))
        norm = max(commutator_norm_bound_check(rep, i) for i in range(a.n))
        print(json.dumps({
            "bounds": [k, k],
            "dim": len(rep.basis),
            "spectrum": spectrum,
            "kernel": [str(e) for e in rep.kernel_labels()],
            "phase_defect": rep.phase_defect(),
            "max_commutator_norm": round(norm, 12),
        }, ensure_ascii=False))


if __name__ == "__main__":
    main()
