"""Single-site proposal kernels.

Both kernels change exactly one site.  ``propose_random`` is the symmetric
uniform kernel; ``propose_gwg`` samples a (site, value) move from a softmax
over first-order estimates of the change in a target log-probability ``f``
(Gibbs-with-gradients), with the estimate halved as in locally balanced
proposals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


class NonFiniteGradientError(ArithmeticError):
    pass


@dataclass
class ProposalOutcome:
    candidate: np.ndarray
    changed_site: int
    new_value: int
    log_q_forward: float
    log_q_reverse: float
    # Set by propose_gwg: gradient of the target at the candidate, reusable on accept.
    candidate_grad: np.ndarray | None = None


def propose_random(x: np.ndarray, cardinality: int, rng: np.random.Generator) -> ProposalOutcome:
    d = len(x)
    site = int(rng.integers(d))
    v = int(rng.integers(cardinality - 1))
    old = int(x[site])
    if v >= old:
        v += 1
    cand = x.copy()
    cand[site] = v
    lq = -math.log(d * (cardinality - 1))
    return ProposalOutcome(cand, site, v, lq, lq)


def gwg_category_scores(grad: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Move logits ``(grad[i, v] - grad[i, x_i]) / 2``; the current value of each site is -inf."""
    grad = np.asarray(grad, dtype=np.float64)
    d = len(x)
    if grad.shape[0] != d:
        raise ValueError(f"gradient has {grad.shape[0]} rows, config has {d} sites")
    if not np.all(np.isfinite(grad)):
        i, v = np.argwhere(~np.isfinite(grad))[0]
        raise NonFiniteGradientError(f"non-finite gradient entry at site {i}, value {v}")
    rows = np.arange(d)
    cur = grad[rows, x]
    scores = (grad - cur[:, None]) / 2.0
    scores[rows, x] = -np.inf
    return scores


def _log_normalizer(scores: np.ndarray) -> float:
    m = float(scores.max())
    return m + math.log(float(np.exp(scores - m).sum()))


def move_log_probs(grad: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Log-probabilities of every (site, value) move; -inf on the current values."""
    scores = gwg_category_scores(grad, x)
    return scores - _log_normalizer(scores)


def _mix(log_p: float, log_uniform: float, mix: float) -> float:
    if mix == 0.0:
        return log_p
    a = math.log(mix) + log_uniform
    b = math.log1p(-mix) + log_p
    hi, lo = (a, b) if a >= b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


def propose_gwg(
    x: np.ndarray,
    f_grad: np.ndarray,
    f_grad_at_candidate: Callable[[np.ndarray], np.ndarray],
    rng: np.random.Generator,
    mix: float = 0.0,
) -> ProposalOutcome:
    """Draw one move from the softmax over ``gwg_category_scores(f_grad, x)``.

    ``f_grad_at_candidate`` returns the gradient of the same target at the
    proposed configuration; it is needed for the reverse move probability.

    With ``mix > 0`` the move comes from the uniform kernel with probability
    ``mix`` and the reported log-probabilities are those of the mixture.  A
    steep target otherwise concentrates the softmax on a single move, and if
    that move is rejected the chain cannot leave.
    """
    if not 0.0 <= mix < 1.0:
        raise ValueError("mix must lie in [0, 1)")
    scores = gwg_category_scores(f_grad, x)
    v_card = scores.shape[1]
    log_uniform = -math.log(len(x) * (v_card - 1))
    flat = scores.ravel()
    m = float(flat.max())
    w = np.exp(flat - m)
    total = float(w.sum())
    log_z = m + math.log(total)
    if mix > 0.0 and rng.random() < mix:
        site = int(rng.integers(len(x)))
        value = int(rng.integers(v_card - 1))
        if value >= x[site]:
            value += 1
        k = site * v_card + value
    else:
        k = int(np.searchsorted(np.cumsum(w), rng.random() * total, side="right"))
        k = min(k, flat.size - 1)
        while w[k] == 0.0:  # never land on a masked entry through round-off
            k -= 1
        site, value = divmod(k, v_card)
    log_q_fwd = _mix(float(flat[k]) - log_z, log_uniform, mix)

    old = int(x[site])
    cand = x.copy()
    cand[site] = value
    grad_c = np.asarray(f_grad_at_candidate(cand), dtype=np.float64)
    rev = gwg_category_scores(grad_c, cand)
    log_q_rev = _mix(float(rev[site, old]) - _log_normalizer(rev), log_uniform, mix)
    return ProposalOutcome(cand, int(site), int(value), log_q_fwd, log_q_rev, grad_c)
