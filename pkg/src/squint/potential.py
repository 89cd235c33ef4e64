"""Stable numerics for the learning-rate-averaged exponential kernel.

Everything in this package reduces to the moments

    I_k(R, V) = integral_0^{1/2} eta^k exp(eta*R - eta^2*V) d(eta),  k in {0, 1, 2},

and the potential

    Phi(R, V) = integral_0^{1/2} (exp(eta*R - eta^2*V) - 1) / eta d(eta).

``I_0`` is dPhi/dR (an unnormalised expert weight), ``I_1`` is d2Phi/dR2
(an unnormalised mixture weight) and ``I_2`` backs curvature diagnostics.
R can reach +-1e4, so exp(eta*R) must never be materialised in linear
domain; ``log_moment`` keeps the whole computation in logs.

Two evaluation paths:

* analytic (V >= ``V_SWITCH``): complete the square,
  eta*R - eta^2*V = R^2/(4V) - V*(eta - mu)^2, and express each moment
  through Gaussian tail moments T_k(x) = e^{x^2} int_x^inf (t-x)^k
  e^{-t^2} dt (erfcx for moderate x, an asymptotic series deep in the
  tail).  The integral is first reflected (eta -> 1/2 - eta) whenever
  R > V/2 so the effective linear coefficient is <= V/2; after that,
  every subtraction removes a same-sign term that is provably smaller,
  so there is no catastrophic cancellation anywhere in the R range.
* quadrature (V < ``V_SWITCH``, plus a safety fallback): shift the
  exponent by its maximum M over [0, 1/2], integrate
  eta^k exp(h(eta) - M) with Gauss-Legendre panels laid out around the
  peak and truncated at a 70-e-fold drop, then add M back to the log.
  Panel counts double until the result is stable to ``QUAD_TOL``.

The erfcx difference degrades like 1/sqrt(V) as V -> 0, which is why the
dispatch switches to quadrature below ``V_SWITCH``; the two paths agree
to ~1e-10 in a band around the switch (pinned by tests).

All functions broadcast numpy-style, are pure and thread-safe.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import special

# Module constants (defaults; the public entry points accept overrides).
V_SWITCH = 1e-3          # analytic path used at or above this variance
QUAD_TOL = 1e-12         # relative agreement required between panel refinements
MAX_EXPONENT = 690.0     # largest exponent for which linear-domain phi is allowed

_SQRT_PI = math.sqrt(math.pi)
_LOG_MAX = 709.0         # exp() overflows just above this
_DROP = 70.0             # e-folds after which the shifted integrand is truncated
_TAIL_CUTOFF = 10.0      # switch point between erfcx formulas and tail series
_PHI_EFOLDS = 6.0        # target exponent variation per quadrature panel
_PHI_DEAD = -90.0        # octaves where exp(h) is below e^-90 need no refinement
_PHI_CHUNK_BUDGET = 4_000_000  # lanes*nodes kept under this per phi chunk


class PotentialRangeError(ValueError):
    """Linear-domain value would overflow double precision."""


def _double_factorials(n):
    vals = [1.0]
    for j in range(1, n + 1):
        vals.append(vals[-1] * (2 * j + 1))
    return vals


_DFACT = _double_factorials(15)                      # (2j+1)!!
_T1_SERIES = tuple((-1.0) ** j * _DFACT[j] for j in range(15))
_T2_SERIES = tuple((-1.0) ** j * (j + 1) * _DFACT[j] for j in range(15))


def _horner(z, coeffs):
    acc = np.full_like(z, coeffs[-1])
    for c in coeffs[-2::-1]:
        acc *= z
        acc += c
    return acc


@lru_cache(maxsize=8)
def _gl_rule(n):
    # Gauss-Legendre nodes/weights mapped to [0, 1]; nodes are interior.
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _broadcast_rv(R, V):
    r_arr = np.asarray(R, dtype=np.float64)
    v_arr = np.asarray(V, dtype=np.float64)
    if not (np.all(np.isfinite(r_arr)) and np.all(np.isfinite(v_arr))):
        raise ValueError("R and V must be finite")
    if np.any(v_arr < 0.0):
        raise ValueError("V must be non-negative")
    scalar = r_arr.ndim == 0 and v_arr.ndim == 0
    rb, vb = np.broadcast_arrays(r_arr, v_arr)
    shape = rb.shape
    return (np.ascontiguousarray(rb).ravel(),
            np.ascontiguousarray(vb).ravel(), shape, scalar)


# ---------------------------------------------------------------------------
# analytic path: Gaussian tail moments
# ---------------------------------------------------------------------------

def _tail_moments(x, order):
    """T_j(x) = e^{x^2} int_x^inf (t-x)^j e^{-t^2} dt for j <= order, x >= 0.

    Direct erfcx combinations lose ~2*x^2 (j=1) / ~4*x^4 (j=2) ulps to
    cancellation, so past ``_TAIL_CUTOFF`` the (eventually divergent)
    asymptotic series is used instead; at the cutoff its terms are still
    shrinking and truncation sits below 1e-15 relative.
    """
    ex = special.erfcx(x)
    t0 = (0.5 * _SQRT_PI) * ex
    out = [t0]
    if order >= 1:
        hi = x >= _TAIL_CUTOFF
        any_hi = hi.any()
        all_hi = any_hi and hi.all()
        if all_hi:
            xh = x
            z = 1.0 / (2.0 * xh * xh)
            t1 = _horner(z, _T1_SERIES) / (4.0 * xh * xh)
        else:
            t1 = 0.5 * (1.0 - _SQRT_PI * x * ex)
            if any_hi:
                xh = x[hi]
                z = 1.0 / (2.0 * xh * xh)
                t1[hi] = _horner(z, _T1_SERIES) / (4.0 * xh * xh)
        out.append(t1)
        if order >= 2:
            if all_hi:
                t2 = _horner(z, _T2_SERIES) / (4.0 * xh ** 3)
            else:
                t2 = 0.5 * (t0 * (1.0 + 2.0 * x * x) - x)
                if any_hi:
                    t2[hi] = _horner(z, _T2_SERIES) / (4.0 * xh ** 3)
            out.append(t2)
    return out


def _scaled_moments(x, v, order):
    """Moments of eta^j exp(eta*x - eta^2*v) over [0, 1/2] for j <= order.

    Requires x <= v/2 (reflect first otherwise) and v > 0.  Returns
    (S, [m_0, ...]) with I_j = exp(S) * m_j; S is 0 when the exponent
    peaks at the left edge and x^2/(4v) when it peaks inside.
    """
    sv = np.sqrt(v)
    c = 0.5 * sv
    a = -x / (2.0 * sv)
    b = a + c
    tb = _tail_moments(b, order)
    pos = a >= 0.0
    all_pos = pos.all()
    if all_pos:
        head = _tail_moments(a, order)
        # e^{a^2 - b^2}; the exponent is formed from x, v directly (exact).
        fac = np.exp(0.5 * x - 0.25 * v)
        scale = np.zeros_like(x)
    else:
        head = [np.empty_like(x) for _ in range(order + 1)]
        fac = np.empty_like(x)
        scale = np.zeros_like(x)
        if pos.any():
            ta = _tail_moments(a[pos], order)
            for j in range(order + 1):
                head[j][pos] = ta[j]
            fac[pos] = np.exp(0.5 * x[pos] - 0.25 * v[pos])
        neg = ~pos
        an = a[neg]
        e2 = np.exp(-an * an)
        h0 = (0.5 * _SQRT_PI) * special.erfc(an)
        head[0][neg] = h0
        if order >= 1:
            head[1][neg] = 0.5 * e2 - an * h0
        if order >= 2:
            head[2][neg] = (0.5 + an * an) * h0 - 0.5 * an * e2
        fac[neg] = np.exp(-b[neg] * b[neg])
        scale[neg] = an * an
    m = [(head[0] - fac * tb[0]) / sv]
    if order >= 1:
        m.append((head[1] - fac * (tb[1] + c * tb[0])) / v)
    if order >= 2:
        m.append((head[2] - fac * (tb[2] + 2.0 * c * tb[1] + (c * c) * tb[0]))
                 / (v * sv))
    return scale, m


def _analytic_log_moment(r_arr, v_arr, order):
    """log I_order via tail moments; second return flags unusable lanes.

    Order-2 lanes with small V and small |x| are flagged: there the
    bracket [a, a + sqrt(V)/2] holds only ~(a*sqrt(V))^3 of the
    second-moment tail mass, so the subtraction amplifies rounding past
    ~1e-10; those lanes go to quadrature (they are diagnostic-only).
    """
    refl = r_arr > 0.5 * v_arr
    x = np.where(refl, v_arr - r_arr, r_arr)
    scale, m = _scaled_moments(x, v_arr, order)
    if order == 0:
        core = m[0]
    elif order == 1:
        # reflection maps eta^1 to (1/2 - eta): binomial recombination
        core = np.where(refl, 0.5 * m[0] - m[1], m[1])
    else:
        core = np.where(refl, 0.25 * m[0] - m[1] + m[2], m[2])
    pref = np.where(refl, 0.5 * r_arr - 0.25 * v_arr, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = pref + scale + np.log(core)
    ok = np.isfinite(out)
    if order == 2:
        ok &= (v_arr >= 1.0) | (np.abs(x) >= 16.0)
    return out, ok


# ---------------------------------------------------------------------------
# quadrature path: shifted, peak-adapted Gauss-Legendre panels
# ---------------------------------------------------------------------------

def _peak(r_arr, v_arr):
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = np.where(v_arr > 0.0, r_arr / (2.0 * v_arr),
                      np.where(r_arr > 0.0, np.inf, -np.inf))
    eta = np.clip(mu, 0.0, 0.5)
    return eta, eta * r_arr - eta * eta * v_arr


def _drop_distance(slope, v):
    # positive root of v*d^2 + slope*d = _DROP, in the cancellation-free form
    den = slope + np.sqrt(slope * slope + 4.0 * v * _DROP)
    with np.errstate(divide="ignore"):
        return np.where(den > 0.0, (2.0 * _DROP) / den, np.inf)


def _panel_integral(r_arr, v_arr, order, eta_star, m_max, n_sub):
    xg, wg = _gl_rule(20)
    slope_l = np.maximum(r_arr - 2.0 * v_arr * eta_star, 0.0)
    slope_r = np.maximum(2.0 * v_arr * eta_star - r_arr, 0.0)
    wl = np.minimum(eta_star, _drop_distance(slope_l, v_arr))
    wr = np.minimum(0.5 - eta_star, _drop_distance(slope_r, v_arr))
    f = np.linspace(0.0, 1.0, n_sub + 1)
    left = eta_star[:, None] - wl[:, None] * (1.0 - f[None, :])
    right = eta_star[:, None] + wr[:, None] * f[None, 1:]
    edges = np.concatenate([left, right], axis=1)
    lo = edges[:, :-1]
    width = edges[:, 1:] - lo
    nodes = lo[:, :, None] + width[:, :, None] * xg
    h = (nodes * r_arr[:, None, None] - nodes * nodes * v_arr[:, None, None]
         - m_max[:, None, None])
    g = np.exp(np.minimum(h, 0.0))
    if order:
        g = g * nodes ** order
    return ((g @ wg) * width).sum(axis=1)


def _quad_log_moment(r_arr, v_arr, order, quad_tol):
    eta_star, m_max = _peak(r_arr, v_arr)
    prev = None
    for n_sub in (6, 12, 24):
        val = m_max + np.log(_panel_integral(r_arr, v_arr, order,
                                             eta_star, m_max, n_sub))
        if prev is not None and np.all(np.abs(val - prev)
                                       <= quad_tol * (1.0 + np.abs(val))):
            return val
        prev = val
    return prev


# ---------------------------------------------------------------------------
# public kernel
# ---------------------------------------------------------------------------

def _log_moment_flat(r_arr, v_arr, order, v_switch=V_SWITCH, quad_tol=QUAD_TOL):
    out = np.empty_like(r_arr)
    analytic = v_arr >= v_switch
    if analytic.any():
        vals, ok = _analytic_log_moment(r_arr[analytic], v_arr[analytic], order)
        if not ok.all():
            bad = ~ok
            vals[bad] = _quad_log_moment(r_arr[analytic][bad],
                                         v_arr[analytic][bad], order, quad_tol)
        out[analytic] = vals
    rest = ~analytic
    if rest.any():
        out[rest] = _quad_log_moment(r_arr[rest], v_arr[rest], order, quad_tol)
    return out


def log_moment(R, V, order=0, *, v_switch=None, quad_tol=None):
    """log of integral_0^{1/2} eta^order exp(eta*R - eta^2*V) d(eta).

    Broadcasts over R and V.  Never forms exp(eta*R) in linear domain, so
    it is safe for |R| far beyond 709.  Raises ValueError for order not in
    {0, 1, 2}, non-finite inputs or V < 0.
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    r_arr, v_arr, shape, scalar = _broadcast_rv(R, V)
    out = _log_moment_flat(
        r_arr, v_arr, order,
        V_SWITCH if v_switch is None else float(v_switch),
        QUAD_TOL if quad_tol is None else float(quad_tol))
    return float(out[0]) if scalar else out.reshape(shape)


def _exp_checked(lm):
    arr = np.asarray(lm)
    if arr.size and float(arr.max()) > _LOG_MAX:
        raise PotentialRangeError(
            "linear-domain moment overflows double precision; use log_moment")
    out = np.exp(arr)
    return float(out) if np.ndim(lm) == 0 else out


def dpotential_dR(R, V, **kwargs):
    """First R-derivative of the potential, exp(log_moment(R, V, 0)).

    Linear-domain convenience for diagnostics and small-|R| callers;
    raises PotentialRangeError instead of returning inf.
    """
    return _exp_checked(log_moment(R, V, 0, **kwargs))


def d2potential_dR2(R, V, **kwargs):
    """Second R-derivative of the potential, exp(log_moment(R, V, 1))."""
    return _exp_checked(log_moment(R, V, 1, **kwargs))


# ---------------------------------------------------------------------------
# the potential itself (diagnostic range only; algorithms never call it)
# ---------------------------------------------------------------------------

_OCTAVES = [0.5 * 2.0 ** (-j) for j in range(16, -1, -1)]


def _phi_panels(rc, vc, mu):
    """Panel edges shared by all lanes of a chunk.

    Octaves from 0 resolve the -1/eta plateau; octaves where some lane
    still has a live exponential are subdivided so each panel sees at
    most ~_PHI_EFOLDS of exponent variation.
    """
    scale = max(2.0, float(np.abs(rc).max()), math.sqrt(2.0 * float(vc.max())))
    edges = [0.0]
    prev = 0.0
    for br in _OCTAVES:
        eb = np.clip(mu, prev, br)
        alive = float((rc * eb - vc * eb * eb).max()) > _PHI_DEAD
        n = max(1, int(math.ceil((br - prev) * scale / _PHI_EFOLDS))) if alive else 1
        step = (br - prev) / n
        edges.extend(prev + step * i for i in range(1, n + 1))
        prev = br
    return np.asarray(edges)


def potential(R, V):
    """Phi(R, V) = integral_0^{1/2} (exp(eta*R - eta^2*V) - 1)/eta d(eta).

    Linear-domain diagnostic; raises PotentialRangeError once the peak
    exponent passes MAX_EXPONENT.  The removable singularity at eta = 0
    is benign here: expm1(h)/eta is the exactly-summed small-eta series
    of the integrand and Gauss nodes never sit on the endpoint.
    """
    r_arr, v_arr, shape, scalar = _broadcast_rv(R, V)
    if r_arr.size == 0:
        return np.empty(shape)
    mu_all, m_max = _peak(r_arr, v_arr)
    worst = float(m_max.max())
    if worst > MAX_EXPONENT:
        raise PotentialRangeError(
            f"potential exponent {worst:.1f} exceeds representable cap "
            f"{MAX_EXPONENT:.0f}")
    xg, wg = _gl_rule(16)
    out = np.empty_like(r_arr)
    start = 0
    while start < r_arr.size:
        stop = min(start + 8192, r_arr.size)
        rc = r_arr[start:stop]
        vc = v_arr[start:stop]
        edges = _phi_panels(rc, vc, mu_all[start:stop])
        lo = edges[:-1]
        width = edges[1:] - lo
        nodes = (lo[:, None] + width[:, None] * xg).ravel()
        wts = (width[:, None] * wg).ravel()
        # keep lanes*nodes bounded so temporaries stay small
        lane_cap = max(64, _PHI_CHUNK_BUDGET // nodes.size)
        for s2 in range(0, rc.size, lane_cap):
            r2 = rc[s2:s2 + lane_cap, None]
            v2 = vc[s2:s2 + lane_cap, None]
            h = nodes * r2 - (nodes * nodes) * v2
            out[start + s2:start + s2 + r2.shape[0]] = (np.expm1(h) / nodes) @ wts
        start = stop
    return float(out[0]) if scalar else out.reshape(shape)
