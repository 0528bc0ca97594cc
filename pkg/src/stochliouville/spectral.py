"""Bath spectral densities, memory kernels and the Planck occupation.

Spectral densities are reported per hbar (``J/hbar``), so that
``|k_fi|^2 * J`` is a rate in rad/s.  With that convention

* an Ohmic bath with ``gamma`` equal to the dimensionless coupling
  ``alpha`` describes the two-state model with unit matrix element;
* the blackbody branch takes matrix elements in cm (Gaussian units).

The memory kernel is ``Gamma(t) = (2/pi) int_0^wc J(w) cos(w t) / w dw``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
from scipy import integrate

from .exceptions import DivergenceError
from .physcore import CONSTANTS

__all__ = [
    "Ohmic",
    "Blackbody",
    "Tabulated",
    "SpectralDensity",
    "DeltaKernel",
    "SampledKernel",
    "MemoryKernel",
    "evaluate_J",
    "memory_kernel",
    "planck_occupation",
    "gaussian_kernel",
    "load_tabulated_csv",
    "default_cutoff",
]

_KB_ERG = CONSTANTS.kB * (CONSTANTS.hbar_cgs / CONSTANTS.hbar)  # erg/K


@dataclass(frozen=True)
class Ohmic:
    """``J(w) = gamma * w``, optionally with a sharp cutoff."""

    gamma: float
    cutoff: float | None = None

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.cutoff is not None and not self.cutoff > 0:
            raise ValueError("cutoff must be positive")


@dataclass(frozen=True)
class Blackbody:
    """Thermal radiation field acting on a charge through the dipole coupling."""

    temperature: float
    charge: float = CONSTANTS.e_esu

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")


@dataclass(frozen=True)
class Tabulated:
    """Spectral density sampled at increasing frequencies; linear in between."""

    omega: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        j = np.asarray(self.values, dtype=float)
        if w.ndim != 1 or w.shape != j.shape or w.size < 2:
            raise ValueError("tabulated density needs two equal-length 1-D arrays (>= 2 samples)")
        if np.any(w < 0) or np.any(np.diff(w) <= 0):
            raise ValueError("tabulated frequencies must be >= 0 and strictly increasing")
        if np.any(j < 0):
            raise ValueError("tabulated spectral density must be non-negative")
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "values", j)


SpectralDensity = Union[Ohmic, Blackbody, Tabulated]


@dataclass(frozen=True)
class DeltaKernel:
    """``Gamma(t) = weight * delta(t)``; the Ohmic limit has ``weight = 2*gamma``."""

    weight: float


@dataclass(frozen=True)
class SampledKernel:
    """Kernel values on the uniform grid ``t_i = i * spacing``, ``i >= 0``."""

    spacing: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("kernel values must be a non-empty 1-D array")
        if not np.all(np.isfinite(v)):
            raise ValueError("kernel values must be finite")
        if not self.spacing > 0:
            raise ValueError("kernel spacing must be positive")
        object.__setattr__(self, "values", v)

    @property
    def t(self):
        return self.spacing * np.arange(self.values.size)

    @property
    def support(self):
        return self.spacing * (self.values.size - 1)

    def __call__(self, t):
        """Linear interpolation, even in ``t``, zero beyond the support."""
        return np.interp(np.abs(t), self.t, self.values, left=0.0, right=0.0)


MemoryKernel = Union[DeltaKernel, SampledKernel]


def default_cutoff(omega):
    """Quadrature cutoff used for Ohmic kernels of a system with splitting ``omega``."""
    return 50.0 * omega


def planck_occupation(omega, temperature):
    """Mean phonon number ``1/(exp(hbar w / k_B T) - 1)``; zero at ``T = 0``."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ValueError("omega must be non-negative")
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    if temperature == 0:
        out = np.zeros_like(w)
    else:
        if np.any(w == 0):
            raise DivergenceError("occupation diverges at omega = 0 for T > 0")
        x = w / CONSTANTS.kT_over_hbar(temperature)
        with np.errstate(over="ignore"):
            out = 1.0 / np.expm1(x)
    return float(out) if np.ndim(omega) == 0 else out


def _blackbody_J(sd, w):
    if sd.temperature == 0:
        return np.zeros_like(w)
    kT_erg = _KB_ERG * sd.temperature
    n = np.zeros_like(w)
    pos = w > 0
    n[pos] = planck_occupation(w[pos], sd.temperature)
    c3 = CONSTANTS.c ** 3
    # (2 pi^2 e^2 / 3 kT) w u_w / hbar  with  u_w = hbar w^3 <n> / (pi^2 c^3)
    return 2.0 * sd.charge ** 2 * w ** 4 * n / (3.0 * kT_erg * c3)


def evaluate_J(sd, omega):
    """Spectral density (per hbar) at ``omega`` (rad/s); vectorized."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ValueError("omega must be non-negative")
    if isinstance(sd, Ohmic):
        out = sd.gamma * w
        if sd.cutoff is not None:
            out = np.where(w <= sd.cutoff, out, 0.0)
    elif isinstance(sd, Blackbody):
        out = _blackbody_J(sd, np.atleast_1d(w)).reshape(w.shape)
    elif isinstance(sd, Tabulated):
        out = np.interp(w, sd.omega, sd.values, left=0.0, right=0.0)
    else:
        raise TypeError(f"unknown spectral density {type(sd).__name__}")
    return float(out) if np.ndim(omega) == 0 else out


def _check_uniform_grid(t_grid):
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 1:
        raise ValueError("t_grid must be a non-empty 1-D array")
    if t[0] != 0.0:
        raise ValueError("t_grid must start at 0")
    if t.size > 1:
        h = t[1] - t[0]
        if h <= 0 or not np.allclose(np.diff(t), h, rtol=1e-9, atol=0.0):
            raise ValueError("t_grid must be uniform and increasing")
    else:
        h = 1.0
    return t, h


def _quad_kernel(g, t, cutoff):
    out = np.empty_like(t)
    for i, ti in enumerate(t):
        if ti == 0.0:
            val, _ = integrate.quad(g, 0.0, cutoff, epsabs=0.0, epsrel=1e-11, limit=500)
        else:
            val, _ = integrate.quad(g, 0.0, cutoff, weight="cos", wvar=ti,
                                    epsabs=0.0, epsrel=1e-11, limit=500)
        out[i] = val
    return (2.0 / math.pi) * out


def _tabulated_kernel(sd, t, cutoff):
    wmax = sd.omega[-1] if cutoff is None else min(cutoff, sd.omega[-1])
    w0, j0 = sd.omega[0], sd.values[0]
    if w0 == 0.0 and j0 > 0.0:
        raise DivergenceError("J(w)/w is not integrable at w = 0 (J(0) > 0)")
    n = max(4001, int(math.ceil(wmax * t[-1] / (math.pi / 32))) + 1)
    nodes = np.union1d(sd.omega[sd.omega <= wmax], np.linspace(0.0, wmax, n))
    J = np.interp(nodes, sd.omega, sd.values, left=0.0, right=0.0)
    g = np.empty_like(nodes)
    g[1:] = J[1:] / nodes[1:]
    # limit of J/w at 0 along the first interpolation segment
    g[0] = sd.values[1] / sd.omega[1] if w0 == 0.0 else 0.0
    integrand = g[None, :] * np.cos(np.outer(t, nodes))
    return (2.0 / math.pi) * integrate.trapezoid(integrand, nodes, axis=1)


def memory_kernel(sd, t_grid=None, cutoff=None):
    """Memory kernel of a spectral density.

    Parameters
    ----------
    sd : SpectralDensity
    t_grid : array_like, optional
        Uniform grid starting at 0.  If omitted, an Ohmic density without its
        own cutoff returns the delta kernel ``2*gamma*delta(t)``.
    cutoff : float, optional
        Upper frequency limit of the cosine transform.  Falls back to the
        Ohmic density's own cutoff, or to the last tabulated frequency.

    Returns
    -------
    DeltaKernel or SampledKernel
    """
    if t_grid is None:
        if isinstance(sd, Ohmic) and cutoff is None and sd.cutoff is None:
            return DeltaKernel(2.0 * sd.gamma)
        raise ValueError("a t_grid is required for a sampled memory kernel")
    t, h = _check_uniform_grid(t_grid)
    if isinstance(sd, Ohmic):
        wc = cutoff if cutoff is not None else sd.cutoff
        if wc is None or not np.isfinite(wc):
            raise ValueError("Ohmic kernel quadrature needs a finite cutoff")
        if sd.cutoff is not None:
            wc = min(wc, sd.cutoff)
        gamma = sd.gamma
        values = _quad_kernel(lambda w: gamma, t, wc)
    elif isinstance(sd, Blackbody):
        if sd.temperature == 0:
            return SampledKernel(h, np.zeros_like(t))
        if cutoff is None or not np.isfinite(cutoff):
            raise ValueError("blackbody kernel quadrature needs a finite cutoff")

        def g(w):
            return float(_blackbody_J(sd, np.array([w]))[0] / w) if w > 0 else 0.0

        values = _quad_kernel(g, t, cutoff)
    elif isinstance(sd, Tabulated):
        values = _tabulated_kernel(sd, t, cutoff)
    else:
        raise TypeError(f"unknown spectral density {type(sd).__name__}")
    return SampledKernel(h, values)


def gaussian_kernel(weight, width, spacing, n_widths=5.0):
    """Smooth stand-in for ``weight * delta(t)``.

    ``weight * zeta(t)`` with ``zeta`` a unit-area Gaussian of standard
    deviation ``width`` centred at 0, so that ``int_0^inf`` of the kernel is
    ``weight / 2``.  Sampled out to ``n_widths * width``.
    """
    if not width > 0 or not spacing > 0:
        raise ValueError("width and spacing must be positive")
    n = int(math.ceil(n_widths * width / spacing)) + 1
    t = spacing * np.arange(n)
    zeta = np.exp(-0.5 * (t / width) ** 2) / (math.sqrt(2.0 * math.pi) * width)
    return SampledKernel(spacing, weight * zeta)


def load_tabulated_csv(path):
    """Read a two-column ``omega_rad_per_s, J_value`` CSV with a header row."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1) if r]
    if not rows:
        raise ValueError(f"{path}: empty file")
    try:
        [float(x) for x in rows[0][1]]
    except ValueError:
        pass
    else:
        raise ValueError(f"{path}: a header row is required")
    data = []
    for lineno, row in rows[1:]:
        if len(row) != 2:
            raise ValueError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
        try:
            data.append((float(row[0]), float(row[1])))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    if len(data) < 2:
        raise ValueError(f"{path}: need at least two samples")
    arr = np.array(data, dtype=float)
    return Tabulated(arr[:, 0], arr[:, 1])
