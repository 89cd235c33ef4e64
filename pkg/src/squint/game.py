"""Protocol state for the N-expert prediction game.

One round: the learner posts a weight vector p on the simplex, the
adversary reveals a loss vector in [0, 1]^N, the learner pays <p, loss>.
The per-expert instantaneous regret r_i = <p, loss> - loss_i always lies
in [-1, 1] and satisfies sum_i p_i r_i = 0, the identity the potential
argument hinges on.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .validation import check_loss_vector, check_weight_vector


@dataclass
class PerExpertState:
    """Cumulative regrets and per-expert variances (one V_i per expert)."""

    regret: np.ndarray
    variance: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n_experts):
        return cls(np.zeros(n_experts), np.zeros(n_experts), 0)

    @property
    def n_experts(self):
        return self.regret.shape[0]


@dataclass
class SharedVarState:
    """Cumulative regrets and a single shared scalar variance."""

    regret: np.ndarray
    variance: float = 0.0
    t: int = 0

    @classmethod
    def zeros(cls, n_experts):
        return cls(np.zeros(n_experts), 0.0, 0)

    @property
    def n_experts(self):
        return self.regret.shape[0]


@dataclass
class RoundRecord:
    """One trace row; shared_variance/potential_sum stay None where unused."""

    t: int
    weights: np.ndarray
    loss: np.ndarray
    learner_loss: float
    regret: np.ndarray
    shared_variance: float | None = None
    potential_sum: float | None = None
    root_residual: float | None = field(default=None, repr=False)


def instantaneous_regret(weights, loss):
    """r = <p, loss> * 1 - loss, entrywise in [-1, 1]."""
    p = check_weight_vector(weights)
    ell = check_loss_vector(loss, p.shape[0])
    return float(p @ ell) - ell


def accumulate(state, regret_increment, variance_increment):
    """Fold one round into a state: R += r, V += v, t += 1.

    ``variance_increment`` must match the state kind: a per-expert array
    for PerExpertState, a scalar for SharedVarState.
    """
    r = np.asarray(regret_increment, dtype=np.float64)
    if r.shape != state.regret.shape:
        raise ValueError(
            f"regret increment shape {r.shape} does not match state "
            f"shape {state.regret.shape}")
    if isinstance(state, PerExpertState):
        v = np.asarray(variance_increment, dtype=np.float64)
        if v.shape != state.variance.shape:
            raise TypeError(
                "per-expert state needs a per-expert variance increment")
        return replace(state, regret=state.regret + r,
                       variance=state.variance + v, t=state.t + 1)
    if isinstance(state, SharedVarState):
        if np.ndim(variance_increment) != 0:
            raise TypeError(
                "shared-variance state needs a scalar variance increment")
        return replace(state, regret=state.regret + r,
                       variance=state.variance + float(variance_increment),
                       t=state.t + 1)
    raise TypeError(f"unknown state kind {type(state).__name__}")
