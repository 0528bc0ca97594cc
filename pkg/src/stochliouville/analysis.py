"""Rate, frequency and decoherence-time extraction from ensemble series.

Nonlinear fits use Levenberg-Marquardt (``scipy.optimize.least_squares``,
``method="lm"``) with analytic Jacobians, seeded from log-linear regressions.
Uncertainties are linearized 1-sigma values from ``s^2 (J^T J)^-1`` where
``s^2`` is the residual variance.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize

from .exceptions import FitError

__all__ = [
    "FitReport",
    "fit_exponential",
    "fit_damped_oscillation",
    "initial_slope",
    "plateau_rate",
    "decoherence_time",
    "asymptotic_pxd_check",
    "MIN_POINTS",
    "SAMPLES_PER_PERIOD",
]

MIN_POINTS = 10
SAMPLES_PER_PERIOD = 8
_MAX_NFEV = 2000


@dataclass
class FitReport:
    """Result of one fit.

    Attributes
    ----------
    model : str
        ``"exponential"``, ``"damped-oscillation"``, ``"linear"`` or ``"plateau"``.
    params, sigma : dict
        Best-fit values and their 1-sigma uncertainties (same keys).
    residual_rms : float
        Root-mean-square residual, in the units of the data.
    window : tuple of float
        First and last time actually used (s).
    n_points : int
    degenerate : bool
        True when the data do not determine the parameters.
    notes : str
    """

    model: str
    params: dict
    sigma: dict
    residual_rms: float
    window: tuple
    n_points: int
    degenerate: bool = False
    notes: str = ""
    extra: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.params[key]

    def to_dict(self):
        d = asdict(self)
        d["window"] = list(self.window)
        return _jsonable(d)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _select(t, y, window):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y)
    if t.shape[0] != y.shape[0]:
        raise ValueError(f"t and series lengths differ ({t.shape[0]} vs {y.shape[0]})")
    if window is None:
        m = np.ones(t.shape, dtype=bool)
    else:
        lo, hi = window
        lo = -np.inf if lo is None else lo
        hi = np.inf if hi is None else hi
        m = (t >= lo) & (t <= hi)
    return t[m], y[m]


def _lin_sigma(jac, resid, n_params):
    dof = max(resid.size - n_params, 1)
    s2 = float(resid @ resid) / dof
    try:
        cov = s2 * np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        return np.full(n_params, np.inf)
    return np.sqrt(np.clip(np.diag(cov), 0.0, None))


def _loglinear_rate(tau, ratio):
    """Seed ``r`` from ``ratio ~ exp(-r tau)`` using the points with ratio > 0.05."""
    m = ratio > 0.05
    if np.count_nonzero(m) < 2:
        m = ratio > 0
    if np.count_nonzero(m) < 2 or np.ptp(tau[m]) == 0:
        return 0.0
    return -float(np.polyfit(tau[m], np.log(ratio[m]), 1)[0])


def _solve(fun, jac, x0, what):
    try:
        res = optimize.least_squares(fun, x0, jac=jac, method="lm", max_nfev=_MAX_NFEV,
                                     xtol=1e-15, ftol=1e-15, gtol=1e-15)
    except ValueError as exc:
        raise FitError(f"{what}: {exc}") from exc
    if res.status <= 0 or not np.all(np.isfinite(res.x)):
        raise FitError(f"{what} did not converge: {res.message}")
    return res


def fit_exponential(t, y, window=None):
    """Fit ``y(t) = y0 exp(-r (t - t0))`` with ``y0`` fixed at the first sample.

    Parameters
    ----------
    t, y : array_like
        Sample times (s) and values.
    window : (float, float), optional
        Inclusive time range to use.

    Returns
    -------
    FitReport
        ``params["rate"]`` in 1/s.

    Raises
    ------
    FitError
        Fewer than ``MIN_POINTS`` samples, non-positive ``y0`` or non-convergence.
    """
    t, y = _select(t, np.asarray(y, dtype=float), window)
    if t.size < MIN_POINTS:
        raise FitError(f"exponential fit needs >= {MIN_POINTS} points, got {t.size}")
    y0 = float(y[0])
    if not y0 > 0:
        raise FitError("exponential fit needs a positive first sample")
    tau = t - t[0]
    span = float(tau[-1]) or 1.0
    seed = _loglinear_rate(tau, y / y0) * span

    def fun(x):
        return y0 * np.exp(-x[0] * tau / span) - y

    def jac(x):
        return (-(tau / span) * y0 * np.exp(-x[0] * tau / span))[:, None]

    # LM needs at least as many residuals as parameters; satisfied by MIN_POINTS.
    res = _solve(fun, jac, [seed], "exponential fit")
    r = float(res.x[0]) / span
    sig = _lin_sigma(res.jac, res.fun, 1)[0] / span
    return FitReport("exponential", {"rate": r, "amplitude": y0}, {"rate": float(sig), "amplitude": 0.0},
                     float(np.sqrt(np.mean(res.fun ** 2))), (float(t[0]), float(t[-1])), int(t.size))


def _phase_seed(tau, z):
    m = np.abs(z) > 0.2 * abs(z[0])
    idx = np.flatnonzero(m)
    # contiguous leading run, before noise dominates the phase
    stop = idx.size
    for k in range(1, idx.size):
        if idx[k] != idx[k - 1] + 1:
            stop = k
            break
    idx = idx[:stop]
    if idx.size < 2:
        idx = np.arange(min(3, z.size))
    ph = np.unwrap(np.angle(z[idx]))
    return float(np.polyfit(tau[idx], ph, 1)[0])


def fit_damped_oscillation(t, py, pz, window=None):
    """Fit ``Pz + i Py = z0 exp((-lambda + i Omega)(t - t0))``, ``z0`` fixed.

    ``Omega`` is signed; with the sign conventions of this package a free
    rotation from ``P = (0, 0, 1)`` gives ``Omega = -omega``.  The report also
    carries ``frequency = |Omega|``.

    Raises
    ------
    FitError
        If the sampling has fewer than ``SAMPLES_PER_PERIOD`` points per
        period, too few points, or the fit fails.
    """
    z_all = np.asarray(pz, dtype=float) + 1j * np.asarray(py, dtype=float)
    t, z = _select(t, z_all, window)
    if t.size < MIN_POINTS:
        raise FitError(f"oscillation fit needs >= {MIN_POINTS} points, got {t.size}")
    z0 = complex(z[0])
    if z0 == 0:
        raise FitError("oscillation fit needs a non-zero first sample")
    tau = t - t[0]
    dphi = np.abs(np.angle(z[1:] / np.where(z[:-1] == 0, 1, z[:-1])))
    lead = dphi[: max(1, min(dphi.size, 16))]
    if np.median(lead) > 2.0 * math.pi / SAMPLES_PER_PERIOD:
        raise FitError(f"oscillation under-resolved: fewer than {SAMPLES_PER_PERIOD} "
                       "samples per period")
    om0 = _phase_seed(tau, z / z0)
    lam0 = _loglinear_rate(tau, np.abs(z / z0))
    scale = np.array([max(abs(lam0), 1.0 / (tau[-1] or 1.0)), max(abs(om0), 1.0)])

    def model(x):
        lam, om = x * scale
        return z0 * np.exp((-lam + 1j * om) * tau)

    def fun(x):
        d = model(x) - z
        return np.concatenate([d.real, d.imag])

    def jac(x):
        m = model(x)
        dl = -tau * m * scale[0]
        do = 1j * tau * m * scale[1]
        return np.column_stack([np.concatenate([dl.real, dl.imag]),
                                np.concatenate([do.real, do.imag])])

    res = _solve(fun, jac, np.array([lam0, om0]) / scale, "oscillation fit")
    lam, om = res.x * scale
    sig = _lin_sigma(res.jac, res.fun, 2) * scale
    resid = res.fun[: t.size] + 1j * res.fun[t.size:]
    return FitReport("damped-oscillation",
                     {"lambda": float(lam), "Omega": float(om), "frequency": float(abs(om))},
                     {"lambda": float(sig[0]), "Omega": float(sig[1]), "frequency": float(sig[1])},
                     float(np.sqrt(np.mean(np.abs(resid) ** 2))),
                     (float(t[0]), float(t[-1])), int(t.size))


def _linear(t, y, model):
    A = np.column_stack([t, np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = A @ coef - y
    sig = _lin_sigma(A, resid, 2) if t.size > 2 else np.zeros(2)
    return FitReport(model, {"slope": float(coef[0]), "intercept": float(coef[1])},
                     {"slope": float(sig[0]), "intercept": float(sig[1])},
                     float(np.sqrt(np.mean(resid ** 2))), (float(t[0]), float(t[-1])),
                     int(t.size))


def initial_slope(t, pxd, window=(0.0, 50e-6)):
    """Least-squares slope of ``pxd`` over ``window`` (default the first 50 us)."""
    ts, ys = _select(t, np.asarray(pxd, dtype=float), window)
    if ts.size < 2:
        raise FitError("initial_slope needs at least two points in the window")
    return _linear(ts, ys, "linear")


def plateau_rate(t, pxd, t_after=0.2e-3, t_end=None):
    """Mean growth rate ``kappa_e`` of ``pxd`` for ``t >= t_after`` (linear fit).

    Raises
    ------
    FitError
        If the tail holds fewer than ``MIN_POINTS`` samples.
    """
    ts, ys = _select(t, np.asarray(pxd, dtype=float), (t_after, t_end))
    if ts.size < MIN_POINTS:
        raise FitError(f"plateau window has {ts.size} samples, need >= {MIN_POINTS}")
    rep = _linear(ts, ys, "plateau")
    rep.params["kappa_e"] = rep.params["slope"]
    rep.sigma["kappa_e"] = rep.sigma["slope"]
    return rep


def _norm_from_entropy(s):
    # invert S(|P|) on [0, 1]; S is decreasing from ln 2 to 0
    from .physcore import entropy_of_polarization

    s = float(s)
    if s >= math.log(2.0):
        return 0.0
    if s <= 0.0:
        return 1.0
    return optimize.brentq(lambda r: entropy_of_polarization(r) - s, 0.0, 1.0, xtol=1e-15)


def decoherence_time(t, series, entropy=False):
    """First time ``|<P>|`` drops below ``e^-1`` of its initial value.

    Parameters
    ----------
    t : array_like
    series : array_like
        Either ``(n, 3)`` averaged polarization vectors, a length-``n`` series
        of norms, or (with ``entropy=True``) entropies in nats, which are
        converted to norms.

    Returns
    -------
    float
        Crossing time in s, interpolated log-linearly between samples.

    Raises
    ------
    FitError
        If the threshold is never reached.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(series, dtype=float)
    if entropy:
        r = np.array([_norm_from_entropy(s) for s in x])
    elif x.ndim == 2:
        r = np.sqrt(np.sum(x ** 2, axis=1))
    else:
        r = np.abs(x)
    if r.shape[0] != t.shape[0]:
        raise ValueError("t and series lengths differ")
    thr = r[0] / math.e
    below = np.flatnonzero(r < thr)
    if below.size == 0 or r[0] == 0:
        raise FitError("|<P>| never falls below e^-1 of its initial value within the horizon")
    k = int(below[0])
    if k == 0:
        return float(t[0])
    a, b = r[k - 1], r[k]
    if b > 0:
        # interpolate ln|P|: exact for an exponential decay
        f = (math.log(a) - math.log(thr)) / (math.log(a) - math.log(b))
    else:
        f = (a - thr) / (a - b)
    return float(t[k - 1] + f * (t[k] - t[k - 1]))


def asymptotic_pxd_check(t, pxd, t_s=0.4e-3, n=1.0, a_fi=None, t_end=None):
    """Fit ``pxd(t) = n - (n - pxd(t_s)) exp(-r (t - t_s))`` for ``t >= t_s``.

    ``r`` is the rate of approach to the asymptote ``n``.  When ``a_fi`` is
    given the ratio ``r / a_fi`` is stored in ``extra``.  A series that already
    sits at ``n`` leaves ``r`` undetermined: the report is then flagged
    ``degenerate`` with ``rate = nan``.

    Raises
    ------
    FitError
        If fewer than ``MIN_POINTS`` samples lie past ``t_s``.
    """
    ts, ys = _select(t, np.asarray(pxd, dtype=float), (t_s, t_end))
    if ts.size < MIN_POINTS:
        raise FitError(f"series too short: {ts.size} samples past t_s, need >= {MIN_POINTS}")
    tau = ts - ts[0]
    c = n - float(ys[0])
    window = (float(ts[0]), float(ts[-1]))
    scale = max(1.0, abs(n))
    if abs(c) <= 1e-12 * scale and np.max(np.abs(ys - n)) <= 1e-12 * scale:
        return FitReport("exponential", {"rate": math.nan, "n": n}, {"rate": math.nan, "n": 0.0},
                         float(np.sqrt(np.mean((ys - n) ** 2))), window, int(ts.size),
                         degenerate=True, notes="series sits at the asymptote; rate indeterminate")
    span = float(tau[-1]) or 1.0
    seed = _loglinear_rate(tau, (n - ys) / c) * span

    def fun(x):
        return n - c * np.exp(-x[0] * tau / span) - ys

    def jac(x):
        return (c * (tau / span) * np.exp(-x[0] * tau / span))[:, None]

    res = _solve(fun, jac, [seed], "asymptotic fit")
    r = float(res.x[0]) / span
    sig = float(_lin_sigma(res.jac, res.fun, 1)[0]) / span
    rep = FitReport("exponential", {"rate": r, "n": n}, {"rate": sig, "n": 0.0},
                    float(np.sqrt(np.mean(res.fun ** 2))), window, int(ts.size))
    if a_fi is not None:
        rep.extra["a_fi"] = float(a_fi)
        rep.extra["rate_over_a_fi"] = r / a_fi
    return rep
