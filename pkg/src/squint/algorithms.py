"""Prediction and update rules, plus sklearn-style online estimators.

Weight rules (all computed in log domain with max-log normalisation):

* per-expert-variance rule: p_i proportional to exp(log_moment(R_i, V_i, 0))
* shared-variance rule:     p_i proportional to exp(log_moment(R_i, V, 0)),
  optionally scaled by a fixed positive prior
* exponential-weights baseline: p_i proportional to exp(-lr * L_i)

The shared-variance rule needs one extra ingredient per round: the round
variance v is defined through the mixture q_i(v) proportional to
exp(log_moment(R_i, V_prev + v, 1)) as the fixed point
v = sum_i q_i(v) r_i^2, i.e. the root of

    f(v) = sum_i exp(log_moment(R_i, V_prev + v, 1)) * (v - r_i^2).

Every summand of f is <= 0 at v = min_i r_i^2 and >= 0 at v = max_i
r_i^2, so that bracket (a subset of [0, 1]) always contains a root and
bisection applies.  Root uniqueness is never assumed; any bracketed root
is accepted and the terminal residual is recorded.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator

from .game import PerExpertState, RoundRecord, SharedVarState, accumulate, instantaneous_regret
from .potential import QUAD_TOL, V_SWITCH, _log_moment_flat
from .validation import check_loss_matrix, check_loss_vector, check_prior

ROOT_TOL = 1e-10
ROOT_MAX_ITER = 80
_BRACKET_SLACK = 1e-9


class BracketViolationError(RuntimeError):
    """f(v) has the wrong sign at a bracket endpoint (kernel bug)."""


class RootResult(NamedTuple):
    value: float
    residual: float
    iterations: int


def _kernel_consts(kernel_options):
    opts = kernel_options or {}
    return (float(opts.get("v_switch", V_SWITCH)),
            float(opts.get("quad_tol", QUAD_TOL)))


def _log_weight_kernel(regret, variance, kernel_options):
    r_arr = np.asarray(regret, dtype=np.float64).ravel()
    v_arr = np.broadcast_to(np.asarray(variance, dtype=np.float64),
                            r_arr.shape).astype(np.float64)
    if not (np.all(np.isfinite(r_arr)) and np.all(np.isfinite(v_arr))):
        raise ValueError("state must be finite")
    if v_arr.size and v_arr.min() < 0.0:
        raise ValueError("variance must be non-negative")
    vs, qt = _kernel_consts(kernel_options)
    return _log_moment_flat(r_arr, v_arr, 0, vs, qt)


def _normalize_log_weights(log_w):
    # max-log subtraction before exponentiation; renormalise afterwards
    w = np.exp(log_w - log_w.max())
    return w / w.sum()


def squint_weights(regret, variance, kernel_options=None):
    """Weights of the per-expert-variance rule from (R, V) arrays."""
    return _normalize_log_weights(
        _log_weight_kernel(regret, variance, kernel_options))


def shared_variance_weights(regret, variance, prior=None, kernel_options=None):
    """Weights of the shared-variance rule; ``prior`` rescales each expert.

    The prior may be unnormalised (only ratios matter); its log is
    centred so that a uniform prior perturbs the log-weights by at most
    one ulp and reproduces the unscaled rule.
    """
    log_w = _log_weight_kernel(regret, float(variance), kernel_options)
    if prior is not None:
        q = check_prior(prior, log_w.shape[0])
        log_w = log_w + np.log(q * q.shape[0])
    return _normalize_log_weights(log_w)


def hedge_weights(cum_losses, learning_rate):
    """Exponential-weights baseline: p_i proportional to exp(-lr * L_i)."""
    lr = float(learning_rate)
    if not np.isfinite(lr) or lr <= 0.0:
        raise ValueError("learning_rate must be positive")
    losses = np.asarray(cum_losses, dtype=np.float64).ravel()
    if not np.all(np.isfinite(losses)):
        raise ValueError("cumulative losses must be finite")
    return _normalize_log_weights(-lr * losses)


def squint_predict(state, kernel_options=None):
    return squint_weights(state.regret, state.variance, kernel_options)


def shared_variance_predict(state, prior=None, kernel_options=None):
    return shared_variance_weights(state.regret, state.variance, prior,
                                   kernel_options)


def solve_round_variance(regret, prev_variance, round_regret, *,
                         tol=ROOT_TOL, max_iter=ROOT_MAX_ITER,
                         kernel_options=None):
    """Bisect f(v) on [min r^2, max r^2] for the shared round variance.

    The residual is the q-normalised |sum_i q_i(v) (v - r_i^2)| with the
    weights scaled so the largest is one, which keeps the stop criterion
    meaningful at any R magnitude.  Stops at ``tol`` or after
    ``max_iter`` halvings, whichever comes first.
    """
    r_state = np.asarray(regret, dtype=np.float64).ravel()
    r = np.asarray(round_regret, dtype=np.float64).ravel()
    if r_state.shape != r.shape:
        raise ValueError("regret and round_regret must have the same length")
    if not (np.all(np.isfinite(r_state)) and np.all(np.isfinite(r))):
        raise ValueError("inputs must be finite")
    if r.size and np.abs(r).max() > 1.0 + 1e-12:
        raise ValueError("round regrets must lie in [-1, 1]")
    v_prev = float(prev_variance)
    if not np.isfinite(v_prev) or v_prev < 0.0:
        raise ValueError("prev_variance must be finite and non-negative")
    r2 = r * r
    lo = float(r2.min())
    hi = float(r2.max())
    if hi <= lo:
        # single expert, or all |r_i| equal: every summand vanishes there
        return RootResult(lo, 0.0, 0)
    vs, qt = _kernel_consts(kernel_options)

    def residual(v):
        lw = _log_moment_flat(r_state, np.full_like(r_state, v_prev + v), 1,
                              vs, qt)
        w = np.exp(lw - lw.max())
        return float(w @ (v - r2)) / float(w.sum())

    res_lo = residual(lo)
    if res_lo > _BRACKET_SLACK:
        raise BracketViolationError(
            f"f({lo}) = {res_lo} > 0 at the lower bracket endpoint")
    if abs(res_lo) <= tol:
        return RootResult(lo, res_lo, 0)
    res_hi = residual(hi)
    if res_hi < -_BRACKET_SLACK:
        raise BracketViolationError(
            f"f({hi}) = {res_hi} < 0 at the upper bracket endpoint")
    if abs(res_hi) <= tol:
        return RootResult(hi, res_hi, 0)
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        res = residual(mid)
        if abs(res) <= tol:
            return RootResult(mid, res, it)
        if res < 0.0:
            lo = mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    return RootResult(mid, residual(mid), max_iter)


def squint_update(state, weights, loss):
    """Advance a per-expert-variance state by one observed round."""
    r = instantaneous_regret(weights, loss)
    return accumulate(state, r, r * r)


def shared_variance_update(state, weights, loss, *, root_tol=ROOT_TOL,
                           max_root_iter=ROOT_MAX_ITER, kernel_options=None):
    """Advance a shared-variance state; returns (new_state, RootResult).

    The round variance is solved at the *updated* regrets R_t with the
    previous cumulative variance in the bracket residuals.
    """
    r = instantaneous_regret(weights, loss)
    root = solve_round_variance(state.regret + r, state.variance, r,
                                tol=root_tol, max_iter=max_root_iter,
                                kernel_options=kernel_options)
    return accumulate(state, r, root.value), root


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

class _OnlineExpertMixin:
    """fit/partial_fit/predict plumbing shared by the online learners.

    ``fit`` expects a (T, N) loss matrix and replays it from a fresh
    state; ``partial_fit`` consumes one loss row (or a batch) and keeps
    going; ``predict`` returns the weight vector for the upcoming round.
    """

    def _reset(self):
        self.n_rounds_ = 0
        self.cum_losses_ = np.zeros(self.n_experts)
        self.learner_total_ = 0.0
        self.records_ = [] if self.record_trace else None
        self._init_state()
        return self

    def _require_state(self):
        if not hasattr(self, "n_rounds_"):
            self._reset()

    def fit(self, losses, y=None):
        rows = check_loss_matrix(losses, self.n_experts)
        self._reset()
        for row in rows:
            self._step(row)
        return self

    def partial_fit(self, losses):
        self._require_state()
        arr = np.asarray(losses, dtype=np.float64)
        if arr.ndim == 1:
            self._step(check_loss_vector(arr, self.n_experts))
        elif arr.ndim == 2:
            for row in check_loss_matrix(arr, self.n_experts):
                self._step(row)
        else:
            raise ValueError("losses must be a vector or a (T, N) matrix")
        return self

    def predict(self):
        """Weight vector the learner plays in the next round."""
        self._require_state()
        return self._weights()

    def _step(self, loss):
        p = self._weights()
        learner = float(p @ loss)
        r = learner - loss
        extra = self._update(p, loss, r)
        self.n_rounds_ += 1
        self.cum_losses_ = self.cum_losses_ + loss
        self.learner_total_ += learner
        if self.record_trace:
            self.records_.append(RoundRecord(
                t=self.n_rounds_, weights=p, loss=loss.copy(),
                learner_loss=learner, regret=r, **extra))


class Squint(_OnlineExpertMixin, BaseEstimator):
    """Online expert learner with one cumulative variance per expert."""

    def __init__(self, n_experts, record_trace=True, kernel_options=None):
        self.n_experts = n_experts
        self.record_trace = record_trace
        self.kernel_options = kernel_options

    def _init_state(self):
        self.state_ = PerExpertState.zeros(self.n_experts)

    def _weights(self):
        return squint_predict(self.state_, self.kernel_options)

    def _update(self, p, loss, r):
        self.state_ = accumulate(self.state_, r, r * r)
        return {}


class SharedVarianceSquint(_OnlineExpertMixin, BaseEstimator):
    """Online expert learner with a single shared variance per round.

    ``prior`` (strictly positive, any scale) turns the rule into its
    prior-weighted generalisation; None keeps the plain rule.
    """

    def __init__(self, n_experts, prior=None, root_tol=ROOT_TOL,
                 max_root_iter=ROOT_MAX_ITER, record_trace=True,
                 kernel_options=None):
        self.n_experts = n_experts
        self.prior = prior
        self.root_tol = root_tol
        self.max_root_iter = max_root_iter
        self.record_trace = record_trace
        self.kernel_options = kernel_options

    def _init_state(self):
        if self.prior is not None:
            check_prior(self.prior, self.n_experts)
        self.state_ = SharedVarState.zeros(self.n_experts)
        self.root_residuals_ = []

    def _weights(self):
        return shared_variance_predict(self.state_, self.prior,
                                       self.kernel_options)

    def _update(self, p, loss, r):
        root = solve_round_variance(
            self.state_.regret + r, self.state_.variance, r,
            tol=self.root_tol, max_iter=self.max_root_iter,
            kernel_options=self.kernel_options)
        self.state_ = accumulate(self.state_, r, root.value)
        self.root_residuals_.append(root.residual)
        return {"shared_variance": root.value,
                "root_residual": root.residual}


class Hedge(_OnlineExpertMixin, BaseEstimator):
    """Exponential-weights baseline.

    ``learning_rate`` wins if given; otherwise the textbook tuning
    sqrt(8 ln N / horizon) is derived from ``horizon``.
    """

    def __init__(self, n_experts, learning_rate=None, horizon=None,
                 record_trace=True):
        self.n_experts = n_experts
        self.learning_rate = learning_rate
        self.horizon = horizon
        self.record_trace = record_trace

    def _resolved_learning_rate(self):
        if self.learning_rate is not None:
            lr = float(self.learning_rate)
            if lr <= 0.0:
                raise ValueError("learning_rate must be positive")
            return lr
        if self.horizon is None:
            raise ValueError("provide learning_rate or horizon")
        return float(np.sqrt(8.0 * np.log(self.n_experts)
                             / float(self.horizon)))

    def _init_state(self):
        self._lr = self._resolved_learning_rate()

    def _weights(self):
        return hedge_weights(self.cum_losses_, self._lr)

    def _update(self, p, loss, r):
        return {}
