"""Command-line interface: ``gwl {sample,enumerate,compare,train,plot}``.

Exit codes: 0 success, 1 tolerance / empty result, 2 usage or parse error,
3 iteration timeout, 4 enumeration budget exceeded, 5 I/O error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, dataset, engine, nn, oracle, plot
from .histogram import BinSpec, BinSpecError, CsvFormatError, read_csv
from .models import EnergyModel, ModelMismatchError, UnknownModelError, make_model

log = logging.getLogger("gwl")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_TIMEOUT, EXIT_BUDGET, EXIT_IO = 0, 1, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def git_blob_sha1(data: bytes) -> str:
    """Content hash as computed by ``git hash-object``."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc.strerror or exc}") from None


def _read(path: Path, what: str, missing_code: int = EXIT_IO) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise CliError(missing_code, f"{what} not found: {path}") from None
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}") from None


def _bins(text: str) -> BinSpec:
    try:
        return BinSpec.parse(text)
    except BinSpecError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from None


def _model(name: str) -> EnergyModel:
    try:
        return make_model(name)
    except UnknownModelError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from None
    except nn.WeightFileError as exc:
        raise CliError(EXIT_USAGE, f"bad weight file: {exc}") from None


def _weights_hash(model_name: str) -> str | None:
    kind, _, arg = model_name.partition(":")
    if kind != "nn":
        return None
    return git_blob_sha1(Path(arg).read_bytes())


def _suffixed(path: Path, tag: str) -> Path:
    return path.with_name(f"{path.stem}{tag}{path.suffix}")


def _side_paths(out: Path) -> dict[str, Path]:
    stem = out.with_suffix("")
    return {
        "csv": out,
        "json": Path(f"{stem}.json") if out.suffix != ".json" else Path(f"{stem}.hist.json"),
        "manifest": Path(f"{stem}.manifest.json"),
        "reps": Path(f"{stem}.reps.json"),
        "checkpoint": Path(f"{stem}.ck.json"),
    }


def _load_init(spec: str, model: EnergyModel):
    if spec == "zeros":
        return None
    text = _read(Path(spec), "init file", EXIT_USAGE)
    try:
        values = json.loads(text) if text.lstrip().startswith("[") else [int(t) for t in text.split()]
        return model.space.validate(np.array(values, dtype=np.int64))
    except (ValueError, ModelMismatchError) as exc:
        raise CliError(EXIT_USAGE, f"bad init config in {spec}: {exc}") from None


# -- sample ---------------------------------------------------------------


def _sample_one(args, out: Path, checkpoint: Path, seed: int, argv: list[str]) -> int:
    started = _now()
    if args.resume:
        text = _read(Path(args.resume), "checkpoint")
        try:
            doc = engine.read_checkpoint(text)
        except engine.CheckpointError as exc:
            raise CliError(EXIT_USAGE, str(exc)) from None
        model = _model(args.model or doc["model"])
        try:
            state = engine.restore(text, model)
        except (engine.CheckpointError, ModelMismatchError) as exc:
            raise CliError(EXIT_USAGE, str(exc)) from None
        iterations = args.iters if args.iters is not None else doc.get("iterations")
        if iterations is None:
            raise CliError(EXIT_USAGE, "checkpoint does not record --iters; pass it explicitly")
        if state.sched.iteration >= iterations:
            print(
                f"notice: run already finished ({state.sched.iteration} of {iterations} iterations); nothing to do",
                file=sys.stderr,
            )
            return EXIT_OK
        saved = doc.get("run", {})
        check_stride = args.check_stride or saved.get("check_stride", 10000)
        max_steps = args.max_steps or saved.get("max_steps", 10**8)
        restart_init = saved.get("restart_init")
        if restart_init is not None:
            restart_init = np.array(restart_init, dtype=np.int64)
    else:
        if not args.model:
            raise CliError(EXIT_USAGE, "--model is required")
        model = _model(args.model)
        bins = _bins(args.bins)
        iterations = 10 if args.iters is None else args.iters
        if iterations < 1:
            raise CliError(EXIT_USAGE, "--iters must be >= 1")
        init = _load_init(args.init, model)
        try:
            state = engine.init_state(
                model, bins, args.proposal, seed, init, args.lnf0,
                args.sample_stride, args.group_width, args.cap, args.mix, args.interp_span,
            )
        except ValueError as exc:
            raise CliError(EXIT_USAGE, str(exc)) from None
        restart_init = state.config.copy() if args.restart else None
        check_stride = args.check_stride or 10000
        max_steps = args.max_steps or 10**8
    run_settings = {
        "check_stride": check_stride,
        "max_steps": max_steps,
        "restart_init": None if restart_init is None else [int(v) for v in restart_init],
    }

    def flush(st):
        _write(checkpoint, engine.snapshot(st, iterations, run_settings))

    flush(state)
    try:
        result = engine.continue_run(
            state, model, iterations, check_stride, max_steps, restart_init, flush
        )
    except engine.IterationTimeout as exc:
        flush(exc.state)
        raise CliError(
            EXIT_TIMEOUT, f"{exc}; checkpoint written to {checkpoint}"
        ) from None

    paths = _side_paths(out)
    _write(paths["csv"], result.hist.to_csv())
    hist_doc = json.loads(result.hist.to_json(state.sched))
    hist_doc["report"] = {k: v for k, v in result.report.items() if k != "wall_time_s"}
    _write(paths["json"], json.dumps(hist_doc) + "\n")
    _write(paths["reps"], json.dumps(result.reps.to_dict()) + "\n")
    manifest = {
        "command": argv,
        "version": __version__,
        "seed": seed,
        "model": model.name,
        "weights_sha1": _weights_hash(model.name),
        "bins": state.hist.spec.to_dict(),
        "proposal": state.proposal_kind,
        "mix": state.mix,
        "interp_span": state.span,
        "ln_f0": state.sched.ln_f0,
        "iterations": iterations,
        "resumed_from": args.resume,
        "total_steps": state.step_count,
        "wall_time_s": result.report["wall_time_s"],
        "started": started,
        "finished": _now(),
        "outputs": {k: str(v) for k, v in paths.items() if k != "checkpoint"} | {"checkpoint": str(checkpoint)},
    }
    _write(paths["manifest"], json.dumps(manifest, indent=2) + "\n")
    log.info(
        "%s: %d iterations, %d steps, %d visited bins",
        out, state.sched.iteration, state.step_count, int(state.hist.visited.sum()),
    )
    return EXIT_OK


def cmd_sample(args, argv: list[str]) -> int:
    out = Path(args.out)
    if args.checkpoint:
        checkpoint = Path(args.checkpoint)
    elif args.resume:
        checkpoint = Path(args.resume)
    else:
        checkpoint = _side_paths(out)["checkpoint"]
    if args.walkers < 1:
        raise CliError(EXIT_USAGE, "--walkers must be >= 1")
    if args.walkers > 1 and args.resume:
        raise CliError(EXIT_USAGE, "--resume continues a single walker; drop --walkers")
    if args.walkers == 1:
        return _sample_one(args, out, checkpoint, args.seed, argv)
    # independent walkers, one seed each, never merged
    for k in range(args.walkers):
        tag = f".w{k}"
        code = _sample_one(args, _suffixed(out, tag), _suffixed(checkpoint, tag), args.seed + k, argv)
        if code != EXIT_OK:
            return code
    return EXIT_OK


# -- enumerate --------------------------------------------------------------


def cmd_enumerate(args, argv: list[str]) -> int:
    model = _model(args.model)
    bins = _bins(args.bins)
    try:
        exact = oracle.enumerate_dos(model, bins, budget=args.budget)
    except oracle.BudgetExceeded as exc:
        raise CliError(EXIT_BUDGET, str(exc)) from None
    _write(Path(args.out), exact.to_csv())
    log.info(
        "%d configurations, %d below and %d above the bin range",
        exact.total, exact.overflow_low, exact.overflow_high,
    )
    return EXIT_OK


# -- compare ---------------------------------------------------------------


def _read_hist(path: str):
    text = _read(Path(path), "histogram CSV")
    try:
        return read_csv(text)
    except (CsvFormatError, BinSpecError) as exc:
        raise CliError(EXIT_USAGE, f"{path}: {exc}") from None


def cmd_compare(args, argv: list[str]) -> int:
    ref = _read_hist(args.reference)
    est = _read_hist(args.estimate)
    try:
        rep = oracle.histogram_error(ref, est)
    except oracle.SpecMismatch as exc:
        raise CliError(EXIT_USAGE, str(exc)) from None
    doc = rep.to_dict()
    # coverage defects on bins the reference holds with at least --min-count configs
    counts = dict(zip((float(c) for c in ref.spec.centers()), (int(v) for v in ref.h)))
    missed = [c for c in rep.only_reference if counts.get(c, 0) >= args.min_count]
    doc["missed_bins"] = missed
    ok = not math.isnan(rep.mean_abs) and rep.mean_abs <= args.tolerance
    if args.max_tolerance is not None:
        ok = ok and rep.max_abs <= args.max_tolerance
    if args.strict_coverage:
        ok = ok and not missed
    doc["pass"] = bool(ok)
    print(json.dumps(doc, allow_nan=True))
    return EXIT_OK if ok else EXIT_FAIL


# -- train -------------------------------------------------------------------


def _idx(path: str, kind):
    p = Path(path)
    if not p.exists():
        raise CliError(EXIT_USAGE, f"IDX file not found: {path}")
    try:
        obj = dataset.read_idx(p)
    except dataset.IdxError as exc:
        raise CliError(EXIT_USAGE, f"{path}: {exc}") from None
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc}") from None
    if not isinstance(obj, kind):
        raise CliError(EXIT_USAGE, f"{path}: expected {kind.__name__}")
    return obj


def cmd_train(args, argv: list[str]) -> int:
    images = _idx(args.idx_images, dataset.IdxImages)
    labels = _idx(args.idx_labels, dataset.IdxLabels)
    try:
        data = dataset.derive_toy(images, labels, side=args.side)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from None
    if not data:
        raise CliError(EXIT_FAIL, "no samples labelled 0 or 1")
    try:
        channels = tuple(int(c) for c in args.channels.split(","))
    except ValueError:
        raise CliError(EXIT_USAGE, f"bad --channels {args.channels!r}") from None
    if args.lr <= 0 or args.epochs < 0:
        raise CliError(EXIT_USAGE, "--lr must be > 0 and --epochs >= 0")
    net = nn.tiny_cnn(args.side, args.side, 2, channels=channels, seed=args.seed)
    history = nn.train(net, data, args.epochs, args.lr, args.batch_size, seed=args.seed)
    _write(Path(args.out), nn.dumps(net))
    acc = nn.accuracy(net, data)
    z = nn.logits(net, np.array([c for c, _ in data]))
    print(
        json.dumps(
            {
                "samples": len(data),
                "epochs": args.epochs,
                "final_loss": history[-1] if history else None,
                "train_accuracy": acc,
                "logit_range": [float(z.min()), float(z.max())],
                "weights_sha1": git_blob_sha1(Path(args.out).read_bytes()),
            }
        )
    )
    return EXIT_OK


# -- plot --------------------------------------------------------------------


def cmd_plot(args, argv: list[str]) -> int:
    inputs = list(args.inputs) + ([args.overlay] if args.overlay else [])
    series = []
    for path in inputs:
        hist = _read_hist(path)
        keep = hist.visited
        series.append((Path(path).stem, hist.spec.centers()[keep], hist.s[keep]))
    if not any(len(x) for _, x, _ in series):
        raise CliError(EXIT_FAIL, "nothing to plot")
    svg = plot.svg_line_chart(series, x_label="output (bin value)", y_label="entropy s (nats)")
    _write(Path(args.out), svg)
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gwl", description="Wang-Landau density-of-states toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", help="run Wang-Landau / gradient Wang-Landau")
    s.add_argument("--model", help="ising:L=4 | nn:<weights.json> | const:D=3,V=2")
    s.add_argument("--proposal", choices=engine.PROPOSALS, default="random")
    s.add_argument("--bins", default="-300:100:1", help="LO:HI:WIDTH (default -300:100:1)")
    s.add_argument("--iters", type=int, default=None, help="flat-histogram iterations (default 10)")
    s.add_argument("--lnf0", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="dos.csv", help="histogram CSV; side files share its stem")
    s.add_argument("--checkpoint", help="checkpoint path (default <stem>.ck.json)")
    s.add_argument("--resume", metavar="CHECKPOINT")
    s.add_argument("--sample-stride", type=int, default=50000)
    s.add_argument("--group-width", type=float, default=5.0)
    s.add_argument("--cap", type=int, default=200, help="representatives per group")
    s.add_argument("--init", default="zeros", help="zeros or a file of site values")
    s.add_argument("--walkers", type=int, default=1)
    s.add_argument("--max-steps", type=int, default=None, help="per-iteration step guard (default 1e8)")
    s.add_argument(
        "--check-stride", type=int, default=None, help="steps between flatness checks (default 10000)"
    )
    s.add_argument("--mix", type=float, default=None, help="uniform share of gwg moves (default 0.1)")
    s.add_argument("--interp-span", choices=engine.SPANS, default="visited")
    s.add_argument("--restart", action="store_true", help="return to --init at every iteration")
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("enumerate", help="exact density of states by enumeration")
    e.add_argument("--model", required=True)
    e.add_argument("--bins", default="-300:100:1")
    e.add_argument("--out", required=True)
    e.add_argument("--budget", type=int, default=None, help=f"max configurations (${oracle.BUDGET_ENV})")
    e.set_defaults(func=cmd_enumerate)

    c = sub.add_parser("compare", help="aligned entropy error between two histogram CSVs")
    c.add_argument("reference")
    c.add_argument("estimate")
    c.add_argument("--tolerance", type=float, default=0.1, help="max allowed mean abs error")
    c.add_argument("--max-tolerance", type=float, default=None, help="max allowed single-bin error")
    c.add_argument("--min-count", type=int, default=1, help="reference count for a missed bin to matter")
    c.add_argument("--strict-coverage", action="store_true", help="fail when reference bins holding >= --min-count configs were never visited")
    c.set_defaults(func=cmd_compare)

    t = sub.add_parser("train", help="train a TinyCNN on toy images derived from IDX files")
    t.add_argument("--idx-images", required=True)
    t.add_argument("--idx-labels", required=True)
    t.add_argument("--side", type=int, default=4)
    t.add_argument("--epochs", type=int, default=20)
    t.add_argument("--lr", type=float, default=0.1)
    t.add_argument("--batch-size", type=int, default=32)
    t.add_argument("--channels", default="3,8")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    g = sub.add_parser("plot", help="SVG line chart of histogram CSVs")
    g.add_argument("--in", dest="inputs", action="append", required=True)
    g.add_argument("--overlay", help="second CSV drawn on the same axes")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_plot)
    return p


def _join_negative_values(argv: list[str]) -> list[str]:
    """``--bins -40:40:1`` -> ``--bins=-40:40:1`` (argparse would read the value as a flag)."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok == "--bins" and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"--bins={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_join_negative_values(argv))
    except SystemExit as exc:  # argparse: 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.func(args, ["gwl"] + argv)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
