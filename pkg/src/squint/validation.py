"""Input validation helpers shared by the algorithms and the harness."""

from __future__ import annotations

import numpy as np

SIMPLEX_TOL = 1e-9


def check_loss_vector(loss, n_experts=None):
    """Validate one round of losses: 1-D, finite, every entry in [0, 1]."""
    arr = np.asarray(loss, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"loss vector must be 1-D, got shape {arr.shape}")
    if n_experts is not None and arr.shape[0] != n_experts:
        raise ValueError(
            f"loss vector has length {arr.shape[0]}, expected {n_experts}")
    if arr.shape[0] < 1:
        raise ValueError("loss vector must have at least one entry")
    if not np.all(np.isfinite(arr)):
        raise ValueError("loss vector must be finite")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("losses must lie in [0, 1]")
    return arr


def check_loss_matrix(losses, n_experts=None):
    """Validate a (T, N) block of loss rows."""
    arr = np.asarray(losses, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"loss matrix must be 2-D, got shape {arr.shape}")
    if n_experts is not None and arr.shape[1] != n_experts:
        raise ValueError(
            f"loss matrix has {arr.shape[1]} columns, expected {n_experts}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("losses must be finite")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError("losses must lie in [0, 1]")
    return arr


def check_weight_vector(weights, n_experts=None, tol=SIMPLEX_TOL):
    """Validate a point on the simplex: non-negative, sums to 1 within tol."""
    arr = np.asarray(weights, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"weight vector must be 1-D, got shape {arr.shape}")
    if n_experts is not None and arr.shape[0] != n_experts:
        raise ValueError(
            f"weight vector has length {arr.shape[0]}, expected {n_experts}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("weights must be finite")
    if arr.min() < 0.0:
        raise ValueError("weights must be non-negative")
    if abs(arr.sum() - 1.0) > tol:
        raise ValueError(f"weights sum to {arr.sum()!r}, expected 1 +- {tol}")
    return arr


def check_prior(prior, n_experts=None):
    """Validate a prior: strictly positive entries (normalisation optional)."""
    arr = np.asarray(prior, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"prior must be 1-D, got shape {arr.shape}")
    if n_experts is not None and arr.shape[0] != n_experts:
        raise ValueError(
            f"prior has length {arr.shape[0]}, expected {n_experts}")
    if not np.all(np.isfinite(arr)) or arr.min() <= 0.0:
        raise ValueError("prior entries must be finite and strictly positive")
    return arr


def check_epsilon(epsilon, n_experts):
    """Validate a quantile level: 1/N <= epsilon < 1 (up to float fuzz)."""
    eps = float(epsilon)
    n = int(n_experts)
    if not np.isfinite(eps) or eps >= 1.0 or eps * n < 1.0 - 1e-9:
        raise ValueError(
            f"epsilon must lie in [1/{n}, 1), got {epsilon!r}")
    return eps
