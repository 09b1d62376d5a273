"""Scalar quantization and the point-to-point TDMA coding scheme.

Lloyd-Max codebooks for the unit Gaussian are designed with closed-form cell
moments (error-function integrals), so the design is exact up to the fixed
point tolerance with no Monte Carlo noise.  The point-to-point scheme splits
[0, 1] into K sub-intervals, activates one sensor per sub-interval per time
step in a round-robin frame, and codes each active sample on its own.
"""

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import ConvergenceError, InfeasibleConfigError

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _norm_pdf(x):
    return np.exp(-0.5 * x * x) / _SQRT_2PI


def _edge_term(edges):
    # x * pdf(x) with the correct 0 limit at +-inf
    out = np.zeros_like(edges)
    finite = np.isfinite(edges)
    out[finite] = edges[finite] * _norm_pdf(edges[finite])
    return out


def _cell_stats(boundaries):
    """Probability, mean and second moment of N(0,1) on each cell."""
    edges = np.concatenate(([-np.inf], boundaries, [np.inf]))
    cdf = ndtr(edges)
    pdf = np.where(np.isfinite(edges), _norm_pdf(edges), 0.0)
    xpdf = _edge_term(edges)
    prob = np.diff(cdf)
    m1 = pdf[:-1] - pdf[1:]
    m2 = prob - (xpdf[1:] - xpdf[:-1])
    return prob, m1, m2


@dataclass(frozen=True)
class ScalarQuantizer:
    """Lloyd-Max codebook for the unit Gaussian source."""

    levels: int
    boundaries: np.ndarray
    points: np.ndarray
    distortion: float

    def __post_init__(self):
        for name in ("boundaries", "points"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=float))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def rate_bits(self):
        return math.log2(self.levels)


def _distortion(boundaries, points):
    prob, m1, m2 = _cell_stats(boundaries)
    return float(np.sum(m2 - 2.0 * points * m1 + points ** 2 * prob))


def lloyd_fixed_point_residual(q):
    """Max violation of the midpoint and centroid conditions of a codebook."""
    res = 0.0
    if q.levels > 1:
        mid = 0.5 * (q.points[:-1] + q.points[1:])
        res = float(np.max(np.abs(q.boundaries - mid)))
    prob, m1, _ = _cell_stats(q.boundaries)
    res = max(res, float(np.max(np.abs(m1 / prob - q.points))))
    return res


def lloyd_max(levels, tol=1e-11, max_iter=500_000):
    """Design the L-level minimum-MSE scalar quantizer for N(0, 1).

    Alternates the centroid and midpoint conditions starting from the
    equal-probability quantile codebook, and stops only once the fixed point
    holds to ``tol`` under independent re-evaluation.
    """
    if levels < 1:
        raise ValueError("need at least one level")
    if levels == 1:
        return ScalarQuantizer(levels=1, boundaries=np.empty(0),
                               points=np.zeros(1), distortion=1.0)
    points = ndtri((2.0 * np.arange(levels) + 1.0) / (2.0 * levels))
    for _ in range(max_iter):
        boundaries = 0.5 * (points[:-1] + points[1:])
        prob, m1, _ = _cell_stats(boundaries)
        new_points = m1 / prob
        delta = float(np.max(np.abs(new_points - points)))
        points = new_points
        if delta < tol:
            boundaries = 0.5 * (points[:-1] + points[1:])
            prob, m1, _ = _cell_stats(boundaries)
            resid = float(np.max(np.abs(m1 / prob - points)))
            if resid < tol:
                return ScalarQuantizer(levels=int(levels), boundaries=boundaries,
                                       points=points,
                                       distortion=_distortion(boundaries, points))
    raise ConvergenceError(
        f"Lloyd iteration did not reach tol={tol} in {max_iter} steps",
        residual=delta,
    )


@lru_cache(maxsize=256)
def _lloyd_default(levels):
    return lloyd_max(levels)


def quantize(q, x):
    """Cell index and reproduction point for x; boundary ties go up."""
    idx = np.searchsorted(q.boundaries, x, side="right")
    rep = q.points[idx]
    if np.ndim(x) == 0:
        return int(idx), float(rep)
    return idx, rep


def scalar_delta(levels):
    """Rate penalty in bits of the Lloyd-Max codebook against the Gaussian
    rate-distortion function at the same distortion: log2(L) - 0.5 log2(1/D)."""
    if levels < 2:
        raise ValueError("delta is defined for two or more levels")
    d = _lloyd_default(levels).distortion
    return math.log2(levels) - 0.5 * math.log2(1.0 / d)


def min_levels_for_distortion(target, max_levels=1 << 16):
    """Smallest codebook size whose designed distortion is <= target."""
    if target <= 0:
        raise InfeasibleConfigError("no finite codebook reaches distortion <= 0")
    levels = 1
    while levels <= max_levels:
        if _lloyd_default(levels).distortion <= target:
            return levels
        levels += 1
    raise InfeasibleConfigError(f"no codebook up to {max_levels} levels reaches {target}")


def quantizer_to_json(q):
    return json.dumps({
        "levels": q.levels,
        "boundaries": [float(b) for b in q.boundaries],
        "points": [float(p) for p in q.points],
        "distortion": q.distortion,
    }, indent=2, sort_keys=True)


def quantizer_from_json(text):
    obj = json.loads(text)
    return ScalarQuantizer(levels=int(obj["levels"]),
                           boundaries=np.asarray(obj["boundaries"], dtype=float),
                           points=np.asarray(obj["points"], dtype=float),
                           distortion=float(obj["distortion"]))


def p2p_distortion_budget(model, d_net, k_intervals):
    """Per-sample coding budget D_K = d_net - (1 - rho^2(1/K)).

    What is left of the field budget once the worst-case estimation error
    across a sub-interval of width 1/K is paid.
    """
    slack = d_net - (1.0 - model(1.0 / k_intervals) ** 2)
    if slack <= 0:
        raise InfeasibleConfigError(
            f"K={k_intervals}: interval width 1/K leaves no sample budget "
            f"under d_net={d_net}"
        )
    if slack > 1.0:
        raise InfeasibleConfigError(f"K={k_intervals}: budget {slack:.6g} exceeds 1")
    return float(slack)


def p2p_rate_for_K(model, d_net, k_intervals):
    """Sum rate (nats per time step, all sensors) of the TDMA scheme at K.

    Each active sensor codes at (1/2) ln(1/D_K) nats per active step and is
    active a K/N fraction of the time, so the sum over sensors is
    -(K/2) ln(D_K) independent of N.
    """
    budget = p2p_distortion_budget(model, d_net, k_intervals)
    return float(-(k_intervals / 2.0) * math.log(budget))


def p2p_per_sensor_rate(model, d_net, k_intervals, n_sensors):
    """Per-sensor, per-time-step rate (K/N) * (1/2) ln(1/D_K)."""
    return p2p_rate_for_K(model, d_net, k_intervals) / n_sensors


def p2p_min_feasible_k(model, d_net, k_limit=100_000):
    """Smallest K whose sub-interval width leaves a positive sample budget."""
    for k in range(1, k_limit + 1):
        if d_net - (1.0 - model(1.0 / k) ** 2) > 0:
            return k
    raise InfeasibleConfigError(f"no feasible K up to {k_limit} for d_net={d_net}")


def p2p_rate_scan(model, d_net, k_min, k_max, rate_cap=1e6):
    """Rates for every K in [k_min, k_max]: list of (K, rate, feasible, capped).

    Rates above ``rate_cap`` (the near-boundary blow-up as D_K -> 0) are
    clamped at the cap and flagged rather than propagated as overflow.
    """
    out = []
    for k in range(k_min, k_max + 1):
        try:
            rate = p2p_rate_for_K(model, d_net, k)
        except InfeasibleConfigError:
            out.append((k, float("nan"), False, False))
            continue
        if not math.isfinite(rate) or rate > rate_cap:
            out.append((k, float(rate_cap), True, True))
        else:
            out.append((k, rate, True, False))
    return out


def optimize_K(model, d_net, k_max=None, rate_cap=1e6):
    """Exhaustive minimization of the p2p sum rate over feasible K.

    The objective grows roughly linearly in K once the budget saturates, so
    the default scan window [K_min_feasible, 10 K_min_feasible] brackets the
    minimizer without assuming unimodality.  Ties break toward smaller K.
    """
    k_min = p2p_min_feasible_k(model, d_net)
    if k_max is None:
        k_max = 10 * k_min
    if k_max < k_min:
        raise InfeasibleConfigError(
            f"no feasible K <= {k_max}: need at least K = {k_min}"
        )
    best_k, best_rate = None, math.inf
    for k, rate, feasible, _ in p2p_rate_scan(model, d_net, k_min, k_max, rate_cap):
        if feasible and rate < best_rate:
            best_k, best_rate = k, rate
    if best_k is None:  # pragma: no cover - k_min is feasible by construction
        raise InfeasibleConfigError("no feasible K in the scan window")
    return best_k, best_rate


@dataclass(frozen=True)
class TdmaSchedule:
    """Round-robin activation: one active sensor per sub-interval per step.

    Sensors and times are 1-based.  Sensor (N/K) l + j (the j-th sensor of
    sub-interval l) is active at times {j, j + N/K, ..., j + (m'-1) N/K}.
    """

    N: int
    K: int
    m_prime: int
    active: dict

    @property
    def n_steps(self):
        return self.m_prime * self.N // self.K

    def active_sensors_at(self, time):
        """1-based sensors active at a 1-based time step, one per sub-interval."""
        frame = self.N // self.K
        j = (time - 1) % frame + 1
        return [frame * l + j for l in range(self.K)]


def tdma_schedule(n_sensors, k_intervals, m_prime):
    if k_intervals < 1 or n_sensors % k_intervals:
        raise InfeasibleConfigError(
            f"K={k_intervals} must divide the sensor count N={n_sensors}"
        )
    if m_prime < 1:
        raise ValueError("need at least one frame")
    frame = n_sensors // k_intervals
    active = {}
    for l in range(k_intervals):
        for j in range(1, frame + 1):
            sensor = frame * l + j
            active[sensor] = tuple(j + r * frame for r in range(m_prime))
    return TdmaSchedule(N=int(n_sensors), K=int(k_intervals),
                        m_prime=int(m_prime), active=active)
