"""Quantile regret, the regret bound, and trace-level verification."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .potential import MAX_EXPONENT, _peak, potential
from .validation import check_epsilon


def epsilon_grid(n_experts):
    """All quantile levels where the comparator can change: k/N, 1 <= k < N."""
    n = int(n_experts)
    return [k / n for k in range(1, n)]


def quantile_index(cumulative_losses, epsilon):
    """Index of the floor(epsilon*N)-th best expert by cumulative loss.

    Ties break by expert index (stable ascending sort); any consistent
    rule works since the guarantee is about the ranked loss value.
    """
    losses = np.asarray(cumulative_losses, dtype=np.float64).ravel()
    n = losses.shape[0]
    eps = check_epsilon(epsilon, n)
    rank = int(math.floor(eps * n + 1e-9))  # fuzz: eps arrives as k/N floats
    rank = min(max(rank, 1), n)
    order = np.argsort(losses, kind="stable")
    return int(order[rank - 1])


def quantile_regret(learner_total, cumulative_losses, epsilon):
    """Learner's total loss minus the epsilon-quantile expert's total.

    epsilon = 1/N recovers external regret against the single best expert.
    """
    losses = np.asarray(cumulative_losses, dtype=np.float64).ravel()
    return float(learner_total) - float(losses[quantile_index(losses, epsilon)])


def regret_bound(variance, horizon, epsilon):
    """The quantile-regret bound at a given accumulated variance.

    sqrt(2*variance) * (1 + sqrt(2*ln((1/2 + ln(T+1))/eps)))
        + 5*ln(1 + (1 + 2*ln(T+1))/eps)

    ``variance`` is the shared V_T for the shared-variance rule and the
    quantile expert's own V_{T,i} for the per-expert rule; the displayed
    expression is identical for both.  Natural logs throughout.
    """
    var = float(variance)
    t = int(horizon)
    eps = float(epsilon)
    if var < 0.0 or not np.isfinite(var):
        raise ValueError("variance must be finite and non-negative")
    if t < 1:
        raise ValueError("horizon must be a positive integer")
    if not 0.0 < eps < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    log_t1 = math.log(t + 1.0)
    first = math.sqrt(2.0 * var) * (
        1.0 + math.sqrt(2.0 * math.log((0.5 + log_t1) / eps)))
    second = 5.0 * math.log(1.0 + (1.0 + 2.0 * log_t1) / eps)
    return first + second


def bound_checks(learner_total, cumulative_losses, horizon, *,
                 shared_variance=None, expert_variances=None):
    """Regret-vs-bound rows over the full epsilon grid.

    Exactly one of ``shared_variance`` (scalar V_T) and
    ``expert_variances`` (per-expert V_{T,i} array) must be given.
    """
    if (shared_variance is None) == (expert_variances is None):
        raise ValueError(
            "pass exactly one of shared_variance / expert_variances")
    losses = np.asarray(cumulative_losses, dtype=np.float64).ravel()
    rows = []
    for eps in epsilon_grid(losses.shape[0]):
        reg = quantile_regret(learner_total, losses, eps)
        if shared_variance is not None:
            var = float(shared_variance)
            kind = "shared"
        else:
            var = float(np.asarray(expert_variances)[
                quantile_index(losses, eps)])
            kind = "quantile_expert"
        bound = regret_bound(var, horizon, eps)
        rows.append({"epsilon": eps, "regret": reg, "bound": bound,
                     "variance": var, "variance_kind": kind,
                     "pass": bool(reg <= bound)})
    return rows


# ---------------------------------------------------------------------------
# potential audit
# ---------------------------------------------------------------------------

@dataclass
class AuditReport:
    """Per-trace summary of the potential-sum monotonicity check."""

    max_step_delta: float
    max_potential: float
    n_rounds: int
    n_audited: int
    unauditable_from: int | None
    tolerance: float
    passed: bool

    def to_dict(self):
        return {
            "max_step_delta": self.max_step_delta,
            "max_potential": self.max_potential,
            "n_rounds": self.n_rounds,
            "n_audited": self.n_audited,
            "unauditable_from": self.unauditable_from,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def _reconstruct_histories(records):
    """Rebuild (R_t, V_t) per round from the recorded weights and losses."""
    weights = np.stack([rec.weights for rec in records])
    losses = np.stack([rec.loss for rec in records])
    learner = np.einsum("ti,ti->t", weights, losses)
    r = learner[:, None] - losses
    cum_regret = np.cumsum(r, axis=0)
    if records[0].shared_variance is not None:
        v = np.array([rec.shared_variance for rec in records])
        cum_var = np.cumsum(v)[:, None]
    else:
        cum_var = np.cumsum(r * r, axis=0)
    return cum_regret, cum_var


def potential_sums(records):
    """sum_i Phi(R_{t,i}, V_t) per round, recomputed from the trace.

    Returns (sums over the auditable prefix, 1-based round index where
    the potential left the representable range, or None).
    """
    records = list(records)
    if not records:
        return np.zeros(0), None
    cum_regret, cum_var = _reconstruct_histories(records)
    rb, vb = np.broadcast_arrays(cum_regret, cum_var)
    _, exponents = _peak(rb.ravel(), vb.ravel())
    round_max = exponents.reshape(rb.shape).max(axis=1)
    over = np.flatnonzero(round_max > MAX_EXPONENT)
    cut = int(over[0]) if over.size else len(records)
    unauditable_from = records[cut].t if cut < len(records) else None
    if cut == 0:
        return np.zeros(0), unauditable_from
    phis = potential(rb[:cut], vb[:cut])
    return phis.sum(axis=1), unauditable_from


def audit_from_sums(sums, unauditable_from, n_rounds, n_experts,
                    tolerance=None):
    """Build an AuditReport from precomputed per-round potential sums."""
    tol = 1e-6 * int(n_experts) if tolerance is None else float(tolerance)
    sums = np.asarray(sums, dtype=np.float64)
    if sums.size:
        deltas = np.diff(np.concatenate([[0.0], sums]))
        max_delta = float(deltas.max())
        max_pot = float(sums.max())
    else:
        max_delta = 0.0
        max_pot = 0.0
    passed = bool(max_delta <= tol and max_pot <= tol)
    return AuditReport(max_delta, max_pot, int(n_rounds), int(sums.size),
                       unauditable_from, tol, passed)


def potential_audit(records, tolerance=None):
    """Check that the potential sum never increases and never goes positive.

    pass iff (max per-step increase <= tol) and (max value <= tol), with
    tol defaulting to 1e-6 * N.  Rounds past the representable range are
    reported via ``unauditable_from`` instead of failing.
    """
    records = list(records)
    if not records:
        return AuditReport(0.0, 0.0, 0, 0, None,
                           0.0 if tolerance is None else float(tolerance),
                           True)
    n = records[0].weights.shape[0]
    sums, unauditable_from = potential_sums(records)
    return audit_from_sums(sums, unauditable_from, len(records), n, tolerance)


def verification_report(audit, bound_rows):
    """Combined JSON-ready verification summary for one run."""
    rows = list(bound_rows)
    return {
        "max_step_delta": audit.max_step_delta,
        "max_potential": audit.max_potential,
        "bound_checks": rows,
        "pass": bool(audit.passed and all(r["pass"] for r in rows)),
    }
