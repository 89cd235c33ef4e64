"""Loss environments for experiments.

Each environment is a callable ``env(t, rng, weights) -> loss vector``;
``weights`` is the learner's prediction for the round, which only the
adversarial environment inspects.  Losses are deterministic functions of
(seed, t) given the environment, which is what makes traces replayable.
"""

from __future__ import annotations

import csv

import numpy as np

from .validation import check_loss_vector


class IIDUniform:
    """Independent Uniform[0, 1] losses per expert per round."""

    def __init__(self, n_experts):
        self.n_experts = n_experts

    def __call__(self, t, rng, weights=None):
        return rng.random(self.n_experts)


class IIDBernoulli:
    """Independent 0/1 losses with fixed per-expert means."""

    def __init__(self, n_experts, means):
        arr = np.asarray(means, dtype=np.float64)
        if arr.shape != (n_experts,):
            raise ValueError(f"means must have length {n_experts}")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("means must lie in [0, 1]")
        self.n_experts = n_experts
        self.means = arr

    def __call__(self, t, rng, weights=None):
        return (rng.random(self.n_experts) < self.means).astype(np.float64)


class FixedGap:
    """Expert 1 gets 0.5 - gap/2, everyone else 0.5 + gap/2.

    Optional bounded uniform noise of amplitude ``noise`` is added and
    the result clipped back into [0, 1]; the default is noiseless so the
    gap structure is exact.
    """

    def __init__(self, n_experts, gap, noise=0.0):
        gap = float(gap)
        if not 0.0 < gap <= 1.0:
            raise ValueError("gap must lie in (0, 1]")
        noise = float(noise)
        if noise < 0.0:
            raise ValueError("noise must be non-negative")
        base = np.full(n_experts, 0.5 + gap / 2.0)
        base[0] = 0.5 - gap / 2.0
        self.n_experts = n_experts
        self.base = np.clip(base, 0.0, 1.0)
        self.noise = noise

    def __call__(self, t, rng, weights=None):
        if self.noise == 0.0:
            return self.base.copy()
        wiggle = self.noise * (2.0 * rng.random(self.n_experts) - 1.0)
        return np.clip(self.base + wiggle, 0.0, 1.0)


class AdversarialAlternating:
    """Loss 1 for the currently highest-weighted expert, 0 for the rest.

    Ties go to the lowest index.  Keeps any weight-concentrating learner
    from settling, which forces nontrivial regret dynamics.
    """

    def __init__(self, n_experts):
        self.n_experts = n_experts

    def __call__(self, t, rng, weights):
        loss = np.zeros(self.n_experts)
        loss[int(np.argmax(weights))] = 1.0
        return loss


class Replay:
    """Replays the loss_1..loss_N columns of a trace CSV."""

    def __init__(self, n_experts, path):
        self.n_experts = n_experts
        self.path = str(path)
        with open(self.path, newline="") as fh:
            reader = csv.DictReader(fh)
            cols = [f"loss_{i + 1}" for i in range(n_experts)]
            if reader.fieldnames is None or any(
                    c not in reader.fieldnames for c in cols):
                raise ValueError(
                    f"replay file {self.path} is malformed: expected "
                    f"columns {cols[0]}..{cols[-1]}")
            try:
                rows = [[float(row[c]) for c in cols] for row in reader]
            except (TypeError, KeyError, ValueError) as exc:
                raise ValueError(
                    f"replay file {self.path} is malformed") from exc
        self.losses = np.asarray(rows, dtype=np.float64)

    def __call__(self, t, rng, weights=None):
        if t > self.losses.shape[0]:
            raise ValueError(
                f"replay file {self.path} exhausted at round {t} "
                f"({self.losses.shape[0]} rows)")
        return check_loss_vector(self.losses[t - 1], self.n_experts)


def make_environment(name, n_experts, params=None):
    """Build an environment from its config name and parameter dict."""
    params = dict(params or {})
    if name == "iid_uniform":
        env = IIDUniform(n_experts)
    elif name == "iid_bernoulli":
        env = IIDBernoulli(n_experts, params.pop("means"))
    elif name == "fixed_gap":
        env = FixedGap(n_experts, params.pop("gap"),
                       params.pop("noise", 0.0))
    elif name == "adversarial_alternating":
        env = AdversarialAlternating(n_experts)
    elif name == "replay":
        env = Replay(n_experts, params.pop("path"))
    else:
        raise ValueError(f"unknown environment {name!r}")
    if params:
        raise ValueError(f"unused environment parameters: {sorted(params)}")
    return env
