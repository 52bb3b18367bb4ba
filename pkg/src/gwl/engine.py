"""Wang-Landau sampling of an output density of states.

One walker owns a configuration, its binned entropy estimate ``s``, the visit
histogram ``h`` and an RNG.  Each step proposes a single-site change, accepts
it with probability ``min(1, exp(s[x] - s[x']) q(x|x') / q(x'|x))`` using the
binned entropies, then adds ``ln f`` to the entropy of the bin the walker sits
in after the decision.  Once ``h`` is flat, ``h`` is cleared and ``ln f``
halved.

With ``proposal="gwg"`` the move is drawn from a gradient-informed proposal
targeting ``f(x) = -S(y(x))``, where ``S`` is the piecewise-linear
interpolation of the binned entropy; ``grad f = -S'(y) dy/dx`` by the chain
rule.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .histogram import (
    HIGH,
    LOW,
    BinSpec,
    DosHistogram,
    ModificationSchedule,
    advance_iteration,
    bin_index,
    is_flat,
)
from .interp import InterpView, entropy_slope, interp_entropy
from .models import EnergyModel
from .proposals import propose_gwg, propose_random

CHECKPOINT_FORMAT = "wlck-v1"
PROPOSALS = ("random", "gwg")
SPANS = ("visited", "all")
DEFAULT_GWG_MIX = 0.1


def default_mix(proposal_kind: str) -> float:
    return DEFAULT_GWG_MIX if proposal_kind == "gwg" else 0.0


class IterationTimeout(RuntimeError):
    """An iteration hit its step guard before the histogram became flat."""

    def __init__(self, state: "WalkerState", steps: int):
        super().__init__(
            f"iteration {state.sched.iteration} not flat after {steps} steps"
        )
        self.state = state


class CheckpointError(ValueError):
    pass


@dataclass
class RepresentativeStore:
    group_width: float = 5.0
    sample_stride: int = 50000
    cap: int = 200
    groups: dict = field(default_factory=dict)  # group -> [(config, energy, step)]

    def group_of(self, z: float) -> int:
        return math.floor(z / self.group_width)

    def offer(self, config: np.ndarray, z: float, step: int) -> None:
        bucket = self.groups.setdefault(self.group_of(z), [])
        if len(bucket) < self.cap:
            bucket.append(([int(v) for v in config], float(z), int(step)))

    def to_dict(self) -> dict:
        return {
            "group_width": self.group_width,
            "sample_stride": self.sample_stride,
            "cap": self.cap,
            "groups": {
                str(g): [[c, z, k] for c, z, k in self.groups[g]]
                for g in sorted(self.groups)
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RepresentativeStore":
        store = cls(float(doc["group_width"]), int(doc["sample_stride"]), int(doc["cap"]))
        for g, items in doc["groups"].items():
            store.groups[int(g)] = [(list(c), float(z), int(k)) for c, z, k in items]
        return store


@dataclass
class WalkerState:
    config: np.ndarray
    energy: float
    hist: DosHistogram
    sched: ModificationSchedule
    rng: np.random.Generator
    proposal_kind: str = "random"
    model_name: str = ""
    step_count: int = 0
    iter_steps: int = 0  # steps taken in the current iteration
    reps: RepresentativeStore = field(default_factory=RepresentativeStore)
    frozen: bool = False  # count visits but leave s untouched
    mix: float = 0.0  # uniform share of the gradient proposal
    span: str = "visited"  # knots of the entropy interpolation
    _grad: np.ndarray | None = field(default=None, repr=False)

    @property
    def bin(self) -> int:
        return bin_index(self.hist.spec, self.energy)


@dataclass
class StepRecord:
    accepted: bool
    old_bin: int
    new_bin: int


def acceptance_log_ratio(s_x: float, s_xp: float, log_q_fwd: float, log_q_rev: float) -> float:
    """``ln A = min(0, s_x - s_x' + ln q(x|x') - ln q(x'|x))``."""
    if s_xp == math.inf:
        return -math.inf
    return min(0.0, (s_x - s_xp) + log_q_rev - log_q_fwd)


def init_state(
    model: EnergyModel,
    bins: BinSpec,
    proposal_kind: str = "random",
    seed: int = 0,
    init=None,
    ln_f0: float = 1.0,
    sample_stride: int = 50000,
    group_width: float = 5.0,
    cap: int = 200,
    mix: float | None = None,
    span: str = "visited",
) -> WalkerState:
    if proposal_kind not in PROPOSALS:
        raise ValueError(f"unknown proposal {proposal_kind!r}")
    if span not in SPANS:
        raise ValueError(f"unknown interpolation span {span!r}")
    mix = default_mix(proposal_kind) if mix is None else float(mix)
    if not 0.0 <= mix < 1.0:
        raise ValueError("mix must lie in [0, 1)")
    config = model.space.zeros() if init is None else np.array(init, dtype=np.int64)
    config = model.space.validate(config).copy()
    z = model.energy(config)
    state = WalkerState(
        config=config,
        energy=z,
        hist=DosHistogram(bins),
        sched=ModificationSchedule(ln_f0),
        rng=np.random.default_rng(seed),
        proposal_kind=proposal_kind,
        model_name=model.name,
        reps=RepresentativeStore(group_width, sample_stride, cap),
        mix=mix,
        span=span,
    )
    if state.bin < 0:
        raise ValueError(f"initial configuration has output {z} outside the bin range")
    return state


def _slope(state: WalkerState, z: float) -> float:
    if state.span == "visited":
        return entropy_slope(state.hist, z)
    return interp_entropy(InterpView.from_histogram(state.hist, visited_only=False), z)[1]


def wl_step(state: WalkerState, model: EnergyModel) -> StepRecord:
    hist = state.hist
    spec = hist.spec
    x = state.config
    z = state.energy
    b = bin_index(spec, z)
    rng = state.rng

    if state.proposal_kind == "random":
        out = propose_random(x, model.space.cardinality, rng)
        z_new = model.energy_after(x, z, out.changed_site, out.new_value)
        grad_new = None
    else:
        if state._grad is None:
            state._grad = model.energy_and_grad(x)[1]
        seen = {}

        def f_grad_at(cand):
            zc, gc = model.energy_and_grad(cand)
            seen["z"], seen["g"] = zc, gc
            return -_slope(state, zc) * gc

        out = propose_gwg(x, -_slope(state, z) * state._grad, f_grad_at, rng, state.mix)
        z_new, grad_new = seen["z"], seen["g"]

    b_new = bin_index(spec, z_new)
    u = rng.random()
    if b_new < 0:
        if b_new == LOW:
            hist.overflow_low += 1
        else:
            hist.overflow_high += 1
        accepted = False
    else:
        log_a = acceptance_log_ratio(hist.s[b], hist.s[b_new], out.log_q_forward, out.log_q_reverse)
        accepted = log_a >= 0.0 or u < math.exp(log_a)

    if accepted:
        state.config = out.candidate
        state.energy = z_new
        state._grad = grad_new
        b_post = b_new
    else:
        b_post = b

    if not state.frozen:
        hist.s[b_post] += state.sched.ln_f
    hist.h[b_post] += 1
    hist.visited[b_post] = True

    state.step_count += 1
    state.iter_steps += 1
    reps = state.reps
    if state.step_count % reps.sample_stride == 0:
        reps.offer(state.config, state.energy, state.step_count)
    return StepRecord(accepted, b, b_post)


def run_iteration(
    state: WalkerState,
    model: EnergyModel,
    check_stride: int = 10000,
    max_steps: int = 10**8,
) -> WalkerState:
    """Step until ``h`` is flat at a check point.  ``h`` is left for the caller to clear."""
    while True:
        wl_step(state, model)
        if state.iter_steps % check_stride == 0 and is_flat(state.hist):
            return state
        if state.iter_steps >= max_steps:
            raise IterationTimeout(state, state.iter_steps)


def _reset_to(state: WalkerState, model: EnergyModel, init) -> None:
    state.config = model.space.validate(np.array(init, dtype=np.int64)).copy()
    state.energy = model.energy(state.config)
    state._grad = None


@dataclass
class RunResult:
    hist: DosHistogram
    reps: RepresentativeStore
    report: dict
    state: WalkerState


def continue_run(
    state: WalkerState,
    model: EnergyModel,
    iterations: int,
    check_stride: int = 10000,
    max_steps: int = 10**8,
    restart_init=None,
    on_iteration=None,
) -> RunResult:
    """Run until ``state.sched.iteration == iterations``."""
    if model.name != state.model_name:
        raise CheckpointError(f"state belongs to model {state.model_name!r}, not {model.name!r}")
    t0 = time.perf_counter()
    per_iter = []
    while state.sched.iteration < iterations:
        if restart_init is not None and state.iter_steps == 0:
            _reset_to(state, model, restart_init)
        run_iteration(state, model, check_stride, max_steps)
        per_iter.append(
            {
                "iteration": state.sched.iteration,
                "ln_f": state.sched.ln_f,
                "steps": state.iter_steps,
                "visited_bins": int(np.count_nonzero(state.hist.h)),
            }
        )
        advance_iteration(state.hist, state.sched)
        state.iter_steps = 0
        if on_iteration is not None:
            on_iteration(state)
    report = {
        "model": model.name,
        "proposal": state.proposal_kind,
        "iterations": per_iter,
        "final_iteration": state.sched.iteration,
        "final_ln_f": state.sched.ln_f,
        "total_steps": state.step_count,
        "overflow_low": state.hist.overflow_low,
        "overflow_high": state.hist.overflow_high,
        "wall_time_s": time.perf_counter() - t0,
    }
    return RunResult(state.hist, state.reps, report, state)


def run(
    model: EnergyModel,
    bins: BinSpec,
    iterations: int,
    proposal_kind: str = "random",
    seed: int = 0,
    init=None,
    ln_f0: float = 1.0,
    check_stride: int = 10000,
    max_steps: int = 10**8,
    sample_stride: int = 50000,
    group_width: float = 5.0,
    cap: int = 200,
    restart: bool = False,
    mix: float | None = None,
    span: str = "visited",
) -> RunResult:
    """Full Wang-Landau run of ``iterations`` flat-histogram rounds.

    With ``restart`` the walker returns to ``init`` at the start of every
    iteration instead of continuing from where the previous one stopped.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    state = init_state(
        model, bins, proposal_kind, seed, init, ln_f0, sample_stride, group_width, cap, mix, span
    )
    restart_init = state.config.copy() if restart else None
    return continue_run(state, model, iterations, check_stride, max_steps, restart_init)


# -- checkpoints ------------------------------------------------------------


def _rng_hex(rng: np.random.Generator) -> str:
    st = rng.bit_generator.state
    if st["bit_generator"] != "PCG64":
        raise CheckpointError("only PCG64 generators can be checkpointed")
    return (
        f"{st['state']['state']:032x}{st['state']['inc']:032x}"
        f"{st['has_uint32']:01x}{st['uinteger']:08x}"
    )


def _rng_from_hex(text: str) -> np.random.Generator:
    if len(text) != 73:
        raise CheckpointError("malformed rng state")
    bg = np.random.PCG64()
    bg.state = {
        "bit_generator": "PCG64",
        "state": {"state": int(text[:32], 16), "inc": int(text[32:64], 16)},
        "has_uint32": int(text[64], 16),
        "uinteger": int(text[65:], 16),
    }
    return np.random.Generator(bg)


def snapshot(state: WalkerState, iterations: int | None = None, run: dict | None = None) -> str:
    """Serialise the walker; ``run`` holds caller loop settings (check stride, step guard)."""
    hist = state.hist
    doc = {
        "format": CHECKPOINT_FORMAT,
        "model": state.model_name,
        "bins": hist.spec.to_dict(),
        "s": [float(v) for v in hist.s],
        "h": [int(v) for v in hist.h],
        "visited": [bool(v) for v in hist.visited],
        "overflow": [hist.overflow_low, hist.overflow_high],
        "ln_f0": state.sched.ln_f0,
        "iteration": state.sched.iteration,
        "step_count": state.step_count,
        "iter_steps": state.iter_steps,
        "rng": _rng_hex(state.rng),
        "config": [int(v) for v in state.config],
        "proposal": state.proposal_kind,
        "frozen": state.frozen,
        "mix": state.mix,
        "span": state.span,
        "iterations": iterations,
        "reps": state.reps.to_dict(),
    }
    if run is not None:
        doc["run"] = run
    return json.dumps(doc) + "\n"


def read_checkpoint(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"not a checkpoint: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"checkpoint format must be {CHECKPOINT_FORMAT!r}")
    return doc


def restore(text: str, model: EnergyModel) -> WalkerState:
    doc = read_checkpoint(text)
    if doc["model"] != model.name:
        raise CheckpointError(f"checkpoint is for model {doc['model']!r}, not {model.name!r}")
    b = doc["bins"]
    spec = BinSpec(float(b["lo"]), float(b["hi"]), float(b["width"]))
    hist = DosHistogram(
        spec,
        np.array(doc["s"], dtype=np.float64),
        np.array(doc["h"], dtype=np.int64),
        np.array(doc["visited"], dtype=bool),
        int(doc["overflow"][0]),
        int(doc["overflow"][1]),
    )
    config = model.space.validate(np.array(doc["config"], dtype=np.int64)).copy()
    return WalkerState(
        config=config,
        energy=model.energy(config),
        hist=hist,
        sched=ModificationSchedule(float(doc["ln_f0"]), int(doc["iteration"])),
        rng=_rng_from_hex(doc["rng"]),
        proposal_kind=doc["proposal"],
        model_name=doc["model"],
        step_count=int(doc["step_count"]),
        iter_steps=int(doc["iter_steps"]),
        reps=RepresentativeStore.from_dict(doc["reps"]),
        frozen=bool(doc.get("frozen", False)),
        mix=float(doc.get("mix", default_mix(doc["proposal"]))),
        span=doc.get("span", "visited"),
    )
