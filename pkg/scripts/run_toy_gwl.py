"""Gradient Wang-Landau on a TinyCNN trained on toy binary digits, vs enumeration.

Trains the fixture network on synthetic 0/1 digits reduced to SIDE x SIDE,
enumerates all 2^(SIDE^2) inputs, runs GWL and plain WL, and writes CSVs plus
an SVG overlay of the three entropy curves.

    python scripts/run_toy_gwl.py --side 4 --iters 10 --outdir toy_out
"""

import argparse
import json
import time
from pathlib import Path

from gwl import engine, fixtures, nn, oracle, plot
from gwl.histogram import BinSpec
from gwl.models import NetworkModel


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--side", type=int, default=4)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bins", default="-300:100:1")
    p.add_argument("--outdir", default="toy_out")
    args = p.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    net = fixtures.trained_toy_network(side=args.side, seed=args.seed)
    nn.save(net, out / "toy.json")
    model = NetworkModel(net, f"nn:{out / 'toy.json'}")
    spec = BinSpec.parse(args.bins)

    t0 = time.perf_counter()
    exact = oracle.enumerate_dos(model, spec)
    (out / "exact.csv").write_text(exact.to_csv())
    print(f"enumerated {exact.total} inputs in {time.perf_counter() - t0:.1f}s")

    series = [("exact", spec.centers()[exact.to_histogram().visited], exact.entropy()[exact.to_histogram().visited])]
    for kind in ("gwg", "random"):
        r = engine.run(model, spec, args.iters, kind, seed=args.seed)
        err = oracle.histogram_error(exact, r.hist)
        (out / f"{kind}.csv").write_text(r.hist.to_csv())
        steps = sum(it["steps"] for it in r.report["iterations"])
        print(f"{kind:6s}: {steps} steps, {r.report['wall_time_s']:.1f}s, {json.dumps(err.to_dict())}")
        keep = r.hist.visited
        series.append((kind, spec.centers()[keep], r.hist.s[keep] + err.offset))
    (out / "entropy.svg").write_text(plot.svg_line_chart(series, "logit (bin value)", "entropy (nats)"))
    print(f"wrote {out}/exact.csv, gwg.csv, random.csv, entropy.svg")


if __name__ == "__main__":
    main()
