"""Visited-bin growth in iteration 0: gradient proposals vs uniform proposals.

Counts distinct output bins reached after a fixed number of steps at
ln f = 1 on TinyCNNs trained on SIDE x SIDE toy digits.  ``--mix`` sets the
uniform share of the gradient proposal (0 = pure gradient moves).

    python scripts/exploration.py --side 8 --steps 200000 --seeds 0 1 2
"""

import argparse
import time

from gwl import engine, fixtures
from gwl.histogram import BinSpec
from gwl.models import NetworkModel


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--side", type=int, default=8)
    p.add_argument("--steps", type=int, default=200_000)
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--bins", default="-300:100:1")
    p.add_argument("--mix", type=float, default=None)
    p.add_argument("--report-every", type=int, default=20_000)
    args = p.parse_args()

    spec = BinSpec.parse(args.bins)
    for seed in args.seeds:
        model = NetworkModel(fixtures.trained_toy_network(side=args.side, seed=seed), f"toy{args.side}-{seed}")
        for kind in ("random", "gwg"):
            s = engine.init_state(model, spec, kind, seed=seed, mix=args.mix if kind == "gwg" else None)
            t0 = time.perf_counter()
            curve = []
            for k in range(1, args.steps + 1):
                engine.wl_step(s, model)
                if k % args.report_every == 0:
                    curve.append(int(s.hist.visited.sum()))
            lo, hi = s.hist.spec.centers()[s.hist.visited][[0, -1]]
            print(f"seed {seed} {kind:6s} visited={curve[-1]:4d} range=[{lo:g}, {hi:g}] "
                  f"curve={curve} {time.perf_counter() - t0:.0f}s", flush=True)


if __name__ == "__main__":
    main()
