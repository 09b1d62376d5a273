"""Rate and distortion functionals for the three coding schemes.

Covers the sensor-sample distortion targets implied by a field target, the
largest admissible test-channel noise (p_max), the distributed sum rate, the
centralized reverse-water-filling reference, and the constant bounds on the
sum rate and on the rate loss of distributed versus centralized coding.
All rates are in nats per snapshot.
"""

import io
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleConfigError
from .estimation import avg_mmse_from_eigvals
from .field import covariance_matrix, sensor_positions

_THETA_GRID = 4096


def jmse_upper_bound(model, n_sensors, jprime):
    """Upper bound on the integrated field MSE given sensor-sample MSE jprime.

    Cauchy-Schwarz worst case over the correlation between interpolation
    error and sensor reconstruction error:
        (1 - r2) + j' + 2 sqrt(r2 (1 - r2) j'),   r2 = rho^2(1/(2N)).
    """
    r2 = model(1.0 / (2 * n_sensors)) ** 2
    return (1.0 - r2) + jprime + 2.0 * np.sqrt(r2 * (1.0 - r2) * jprime)


def jmse_lower_bound(model, n_sensors, jprime):
    """Matching lower bound: r2 j' - 2 sqrt(r2 (1 - r2) j')."""
    r2 = model(1.0 / (2 * n_sensors)) ** 2
    return r2 * jprime - 2.0 * np.sqrt(r2 * (1.0 - r2) * jprime)


def target_distortion_dsc(d_net, n_sensors, model):
    """Sensor-sample distortion D'(N) that guarantees field distortion d_net.

    Root of the upper bound at equality, solved in closed form (quadratic in
    sqrt(J')).  Needs N large enough that the pure interpolation error
    1 - rho^2(1/(2N)) stays below d_net; approaches d_net from below.
    """
    r2 = model(1.0 / (2 * n_sensors)) ** 2
    a = 1.0 - r2
    if a >= d_net:
        raise InfeasibleConfigError(
            f"N={n_sensors} cannot reach field distortion {d_net}: interpolation "
            f"error alone is {a:.6g}; smallest feasible N is "
            f"{smallest_feasible_n(model, d_net)}"
        )
    inner = d_net - a * a
    root = np.sqrt(inner) - np.sqrt(r2 * a)
    if root < 0:
        raise InfeasibleConfigError(
            f"N={n_sensors} infeasible for d_net={d_net} (negative target)"
        )
    return float(root * root)


def reverse_distortion_bound(d_net, n_sensors, model):
    """Sensor-sample distortion D''(N) implied by field distortion d_net.

    Any scheme meeting the field target must keep the sensor-sample MSE at or
    below this; decreases toward d_net as N grows.  Valid once 1/(2N) is
    inside the monotone neighbourhood and rho^2(1/(2N)) >= 1/2.
    """
    tau = 1.0 / (2 * n_sensors)
    if tau > model.theta_mono:
        raise InfeasibleConfigError(
            f"1/(2N) = {tau:.6g} outside monotone radius {model.theta_mono:.6g}"
        )
    r2 = model(tau) ** 2
    if r2 < 0.5:
        raise InfeasibleConfigError(
            f"rho^2(1/(2N)) = {r2:.6g} < 1/2: bound preconditions fail at N={n_sensors}"
        )
    a = 1.0 - r2
    return float((2 * a + 2 * np.sqrt(a * (a + d_net)) + d_net) / r2)


def smallest_feasible_n(model, d_net, n_max=10 ** 7):
    """Smallest N with 1 - rho^2(1/(2N)) < d_net, by doubling scan + backtrack."""
    n = 1
    while n <= n_max:
        if 1.0 - model(1.0 / (2 * n)) ** 2 < d_net:
            lo = max(n // 2, 1)
            for cand in range(lo, n + 1):
                if 1.0 - model(1.0 / (2 * cand)) ** 2 < d_net:
                    return cand
        n *= 2
    raise InfeasibleConfigError(f"no feasible N up to {n_max} for d_net={d_net}")


def find_pmax(cov, target_mse, rel_tol=1e-6):
    """Largest test-channel noise variance whose MMSE stays within target_mse.

    The average MMSE is increasing in p, so bracket by doubling from p=1 and
    bisect; the returned p satisfies avg_mse(p) <= target_mse and
    avg_mse(p (1 + rel_tol)) > target_mse.
    """
    if not 0 < rel_tol <= 1e-3:
        raise ValueError("rel_tol must lie in (0, 1e-3]")
    if target_mse >= 1.0:
        raise InfeasibleConfigError(
            "target at or above the field variance: p_max is unbounded"
        )
    eps = max(cov.clamp_floor, 10 * np.finfo(float).tiny)
    if target_mse <= eps:
        raise InfeasibleConfigError(
            f"target {target_mse} at or below the clamp epsilon {eps}"
        )
    lam = cov.eigvals
    lo, hi = 0.0, 1.0
    while avg_mmse_from_eigvals(lam, hi) <= target_mse:
        lo = hi
        hi *= 2.0
        if hi > 1e300:  # pragma: no cover - unreachable for target < 1
            raise InfeasibleConfigError("bracketing diverged")
    while hi - lo > rel_tol * max(lo, np.finfo(float).tiny):
        assert avg_mmse_from_eigvals(lam, lo) <= target_mse < avg_mmse_from_eigvals(lam, hi)
        mid = 0.5 * (lo + hi)
        if avg_mmse_from_eigvals(lam, mid) <= target_mse:
            lo = mid
        else:
            hi = mid
    return lo


def dsc_sum_rate(cov, p):
    """Sum rate of the distributed scheme at test-channel noise p.

    Mutual information between the sensor vector and its noisy version:
    (1/2) sum_i ln(1 + lambda_i / p) nats per snapshot.
    """
    if p <= 0:
        raise ValueError("noise variance must be positive")
    return float(0.5 * np.sum(np.log1p(cov.eigvals / p)))


@dataclass(frozen=True)
class WaterfillSolution:
    """Reverse water-filling allocation for a Gaussian vector source."""

    theta_level: float
    per_mode_rate: np.ndarray
    total_rate_nats: float
    distortion_achieved: float


def centralized_rate(cov, avg_distortion):
    """Smallest coding rate reaching the average distortion, by water-filling.

    Modes above the water level are coded down to it, modes below are sent as
    zero; the level is the exact piecewise-linear solution of
    sum_i min(lambda_i, level) = N * D.
    """
    if avg_distortion <= 0:
        raise ValueError("distortion budget must be positive")
    lam = cov.eigvals
    n = lam.size
    target = n * avg_distortion
    total = float(lam.sum())
    if target >= total:
        level = max(float(lam[0]), avg_distortion)
        return WaterfillSolution(theta_level=level, per_mode_rate=np.zeros(n),
                                 total_rate_nats=0.0, distortion_achieved=total / n)
    asc = np.sort(lam)
    prefix = np.concatenate([[0.0], np.cumsum(asc)])
    level = None
    for k in range(n):
        cand = (target - prefix[k]) / (n - k)
        lo = asc[k - 1] if k else 0.0
        if lo <= cand <= asc[k]:
            level = cand
            break
    if level is None:  # pragma: no cover - the scan is exhaustive
        raise RuntimeError("water level bracketing failed")
    rates = np.where(lam > level, 0.5 * np.log(lam / level), 0.0)
    achieved = float(np.minimum(lam, level).sum()) / n
    return WaterfillSolution(theta_level=float(level), per_mode_rate=rates,
                             total_rate_nats=float(rates.sum()),
                             distortion_achieved=achieved)


def find_theta(model, target_mse):
    """Largest theta <= theta_mono with rho(theta) > 0 and
    1 - rho^2(theta)/(1 + theta) <= target_mse.

    Grid scan plus bisection refinement; a feasible theta always exists since
    the left side vanishes as theta -> 0.
    """
    if not 0 < target_mse < 1:
        raise ValueError("target must lie in (0, 1)")

    def ok(t):
        r = model(t)
        return r > 0 and 1.0 - r * r / (1.0 + t) <= target_mse

    hi = model.theta_mono
    if ok(hi):
        return float(hi)
    grid = np.linspace(0.0, hi, _THETA_GRID + 1)[1:]
    good = None
    for t in grid:
        if ok(t):
            good = t
        else:
            break
    if good is None:
        good = grid[0]
        while not ok(good):
            good /= 2.0
        bad = grid[0]
    else:
        bad = min(good + hi / _THETA_GRID, hi)
    for _ in range(100):
        mid = 0.5 * (good + bad)
        if ok(mid):
            good = mid
        else:
            bad = mid
    return float(good)


def prop1_sum_rate_bound(theta):
    """Constant upper bound 1/(2 theta^2) on the distributed sum rate."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    return 1.0 / (2.0 * theta * theta)


def rate_loss_bound(d_net, eps, theta):
    """Bound (d_net + eps)/(2 theta^2) on distributed-minus-centralized rate."""
    if eps <= 0 or theta <= 0:
        raise ValueError("eps and theta must be positive")
    return (d_net + eps) / (2.0 * theta * theta)


@dataclass(frozen=True)
class RateReport:
    """Per-N record of the distortion targets, p_max and the three rates."""

    N: int
    d_net: float
    d_prime: float
    d_double_prime: float
    p_max: float
    dsc_sum_rate_nats: float
    centralized_rate_nats: float
    rate_loss_bound_nats: float
    theta: float
    feasible: bool
    infeasible_reason: str = ""


def rate_curve(model, d_net, n_list, eps=None, clamp_floor=1e-10, rel_tol=1e-6):
    """Assemble one RateReport per requested sensor count.

    Infeasible N are flagged in place rather than dropped.  ``eps`` is the
    slack used for the rate-loss pipeline (default 0.05 * d_net); theta comes
    from the averaging-window condition at d_net - eps, and the test-channel
    for the loss bound uses p = theta^2 N.
    """
    if not len(n_list):
        raise ValueError("need at least one sensor count")
    if eps is None:
        eps = 0.05 * d_net
    theta = find_theta(model, d_net - eps)
    loss_bound = rate_loss_bound(d_net, eps, theta)
    reports = []
    for n in n_list:
        try:
            d_prime = target_distortion_dsc(d_net, n, model)
            d_dprime = reverse_distortion_bound(d_net, n, model)
            cov = covariance_matrix(model, sensor_positions(n), clamp_floor)
            p_max = find_pmax(cov, d_prime, rel_tol)
            reports.append(RateReport(
                N=int(n), d_net=d_net, d_prime=d_prime, d_double_prime=d_dprime,
                p_max=p_max, dsc_sum_rate_nats=dsc_sum_rate(cov, p_max),
                centralized_rate_nats=centralized_rate(cov, d_dprime).total_rate_nats,
                rate_loss_bound_nats=loss_bound, theta=theta, feasible=True))
        except InfeasibleConfigError as exc:
            reports.append(RateReport(
                N=int(n), d_net=d_net, d_prime=float("nan"),
                d_double_prime=float("nan"), p_max=float("nan"),
                dsc_sum_rate_nats=float("nan"), centralized_rate_nats=float("nan"),
                rate_loss_bound_nats=loss_bound, theta=theta, feasible=False,
                infeasible_reason=str(exc)))
    return reports


RATE_CSV_COLUMNS = ("N", "d_prime", "d_double_prime", "p_max", "dsc_rate_nats",
                    "centralized_rate_nats", "loss_bound_nats", "feasible")


def fmt_float(x):
    """Shortest round-trip decimal form; the stable cell format for CSV output."""
    return repr(float(x))


def rate_curve_csv(reports, units="nats"):
    """Serialize rate reports to CSV; bit units rename the rate columns."""
    scale = 1.0 if units == "nats" else 1.0 / np.log(2.0)
    cols = list(RATE_CSV_COLUMNS)
    if units == "bits":
        cols = [c.replace("_nats", "_bits") for c in cols]
    out = io.StringIO()
    out.write(",".join(cols) + "\n")
    for r in reports:
        row = [str(r.N), fmt_float(r.d_prime), fmt_float(r.d_double_prime),
               fmt_float(r.p_max), fmt_float(r.dsc_sum_rate_nats * scale),
               fmt_float(r.centralized_rate_nats * scale),
               fmt_float(r.rate_loss_bound_nats * scale),
               "true" if r.feasible else "false"]
        out.write(",".join(row) + "\n")
    return out.getvalue()
