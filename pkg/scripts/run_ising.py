"""Wang-Landau on a small periodic Ising lattice against exact enumeration.

    python scripts/run_ising.py --L 4 --iters 15 --seed 7 --proposal random
"""

import argparse
import json

from gwl import engine, oracle
from gwl.histogram import BinSpec
from gwl.models import IsingModel


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--L", type=int, default=4)
    p.add_argument("--iters", type=int, default=15)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--proposal", choices=engine.PROPOSALS, default="random")
    p.add_argument("--out", help="optional CSV for the estimate")
    args = p.parse_args()

    model = IsingModel(args.L)
    n = 2 * args.L * args.L
    spec = BinSpec(-n - 8, n + 8, 1)
    exact = oracle.enumerate_dos(model, spec)
    result = engine.run(model, spec, args.iters, args.proposal, seed=args.seed)
    err = oracle.histogram_error(exact, result.hist)
    for it in result.report["iterations"]:
        print(f"iter {it['iteration']:2d}  ln_f={it['ln_f']:.2e}  steps={it['steps']:8d}  bins={it['visited_bins']}")
    aligned = result.hist.s + err.offset
    print(f"{'E':>5} {'exact S':>10} {'estimate':>10}")
    for b in range(spec.bin_count):
        if exact.counts[b]:
            print(f"{spec.center(b):5.0f} {exact.entropy()[b]:10.4f} {aligned[b]:10.4f}")
    print(json.dumps(err.to_dict()))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(result.hist.to_csv())


if __name__ == "__main__":
    main()
