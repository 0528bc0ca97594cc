"""Closed-form transition rates and the perturbative occupation probability.

Matrix elements ``k_fi`` are in the units that make ``|k_fi|^2 J`` a rate
(see :mod:`stochliouville.spectral`): dimensionless for the Ohmic two-state
model, cm for the blackbody branch.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .exceptions import DivergenceError
from .physcore import CONSTANTS
from .spectral import DeltaKernel, SampledKernel, evaluate_J, planck_occupation

__all__ = [
    "RateResult",
    "PerturbativeBreakdownWarning",
    "rate_noise",
    "rate_ohmic",
    "rates_quantized",
    "einstein_a",
    "perturbative_occupation",
    "occupation_curve",
    "phenomenological_occupations",
    "CLASSICAL_REGIME_RATIO",
]

#: k_B T / (hbar omega_fi) below which the classical-noise rate is flagged
CLASSICAL_REGIME_RATIO = 3.0


class PerturbativeBreakdownWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class RateResult:
    omega_fi: float
    lambda_noise: float
    lambda_up_q: float
    lambda_down_q: float
    a_spontaneous: float
    occupation: float
    regime_note: str = ""

    def as_dict(self):
        return {
            "omega_fi": self.omega_fi,
            "lambda_noise": self.lambda_noise,
            "lambda_up_q": self.lambda_up_q,
            "lambda_down_q": self.lambda_down_q,
            "a_spontaneous": self.a_spontaneous,
            "occupation": self.occupation,
            "regime_note": self.regime_note,
        }


def rate_noise(k_fi, temperature, sd, omega_fi):
    """Noise-induced rate ``2 |k_fi|^2 (k_B T/hbar) J(w_fi) / w_fi`` (1/s).

    Depends on the transition frequency only through ``|omega_fi|``.
    """
    w = abs(omega_fi)
    if w == 0:
        raise DivergenceError("rate_noise is undefined at omega_fi = 0")
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    return 2.0 * abs(k_fi) ** 2 * CONSTANTS.kT_over_hbar(temperature) * evaluate_J(sd, w) / w


def rate_ohmic(alpha, temperature):
    """Ohmic rate ``2 alpha k_B T / hbar`` (1/s)."""
    if alpha < 0 or temperature < 0:
        raise ValueError("alpha and temperature must be non-negative")
    return 2.0 * alpha * CONSTANTS.kT_over_hbar(temperature)


def rates_quantized(k_fi, sd, omega_fi, temperature):
    """Rates for a quantized bath.

    ``A = 2 |k_fi|^2 J(w_fi)``, ``up = A <n>``, ``down = A (<n> + 1)``.
    """
    w = abs(omega_fi)
    if w == 0:
        raise DivergenceError("omega_fi must be non-zero")
    a = 2.0 * abs(k_fi) ** 2 * evaluate_J(sd, w)
    n = planck_occupation(w, temperature)
    lam_noise = rate_noise(k_fi, temperature, sd, w) if temperature > 0 else 0.0
    ratio = CONSTANTS.kT_over_hbar(temperature) / w
    note = ""
    if ratio < CLASSICAL_REGIME_RATIO:
        note = (f"k_B T / hbar omega_fi = {ratio:.3g} < {CLASSICAL_REGIME_RATIO:g}: "
                "classical-noise rate not reliable")
    return RateResult(omega_fi=w, lambda_noise=lam_noise, lambda_up_q=a * n,
                      lambda_down_q=a * (n + 1.0), a_spontaneous=a, occupation=n,
                      regime_note=note)


def einstein_a(r_fi, omega_fi, charge=CONSTANTS.e_esu):
    """Spontaneous emission rate ``(4 e^2 / 3 hbar c^3) |r_fi|^2 w^3`` (Gaussian units)."""
    if not omega_fi > 0:
        raise ValueError("omega_fi must be positive")
    return (4.0 * charge ** 2 * abs(r_fi) ** 2 * omega_fi ** 3
            / (3.0 * CONSTANTS.hbar_cgs * CONSTANTS.c ** 3))


def _kernel_values(kernel, s):
    if isinstance(kernel, SampledKernel):
        return kernel(s)
    if callable(kernel):
        return np.asarray(kernel(s), dtype=float)
    raise TypeError(f"unsupported kernel {type(kernel).__name__}")


def occupation_curve(t_max, kernel, k_fi, Omega_fi, temperature, n_points=2000):
    """Occupation ``v_f`` on a uniform grid over ``[0, t_max]``.

    For a delta kernel the boundary delta carries half its weight, giving
    ``v_f(t) = lambda t`` exactly.  Otherwise the double integral is done by
    nested trapezoidal quadrature using ``s = t1 - t2``.
    """
    if t_max < 0:
        raise ValueError("t must be non-negative")
    t = np.linspace(0.0, t_max, n_points)
    pref = 2.0 * CONSTANTS.kT_over_hbar(temperature) * abs(k_fi) ** 2
    if isinstance(kernel, DeltaKernel):
        return t, pref * 0.5 * kernel.weight * t
    g = _kernel_values(kernel, t) * np.cos(Omega_fi * t)
    inner = integrate.cumulative_trapezoid(g, t, initial=0.0)
    return t, pref * integrate.cumulative_trapezoid(inner, t, initial=0.0)


def perturbative_occupation(t, kernel, k_fi, Omega_fi, temperature, n_points=2000):
    """Occupation probability ``v_f(t)`` of the final state to lowest order.

    Sampled kernels are integrated at ``n_points`` and ``2*n_points`` and the
    result Richardson-extrapolated.  Values above 1 emit a
    :class:`PerturbativeBreakdownWarning`.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return 0.0
    if isinstance(kernel, DeltaKernel):
        v = float(occupation_curve(t, kernel, k_fi, Omega_fi, temperature, 2)[1][-1])
    else:
        v1 = occupation_curve(t, kernel, k_fi, Omega_fi, temperature, n_points)[1][-1]
        v2 = occupation_curve(t, kernel, k_fi, Omega_fi, temperature, 2 * n_points)[1][-1]
        v = float((4.0 * v2 - v1) / 3.0)
    if v > 1.0:
        warnings.warn(f"v_f({t:g}) = {v:.3g} > 1: perturbation theory has broken down",
                      PerturbativeBreakdownWarning, stacklevel=2)
    return v


def phenomenological_occupations(t, lambda_up, lambda_down, v1_0):
    """Solution ``(v0, v1)`` of the two-state rate equations.

    ``dv1/dt = -lambda_down v1 + lambda_up v0``, ``v0 + v1 = 1``.
    """
    if lambda_up < 0 or lambda_down < 0:
        raise ValueError("rates must be non-negative")
    if not 0.0 <= v1_0 <= 1.0:
        raise ValueError("v1_0 must lie in [0, 1]")
    t = np.asarray(t, dtype=float)
    total = lambda_up + lambda_down
    if total == 0:
        v1 = np.full_like(t, v1_0)
    else:
        v_inf = lambda_up / total
        v1 = v_inf + (v1_0 - v_inf) * np.exp(-total * t)
    v0 = 1.0 - v1
    if v1.ndim == 0:
        return float(v0), float(v1)
    return v0, v1

