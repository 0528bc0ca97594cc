"""Physical constants, two-level kinematics and entropy.

Internally the package works with hbar = 1: energies are carried as angular
frequencies (rad/s) and times in seconds.  Conversions to lab units
(eV, K) happen here.

Two-level conventions
---------------------
Basis ordering is ``(|0>, |1>)`` with ``|1>`` the upper level.  The Pauli
matrices are

    sigma_x = |1><1| - |0><0|
    sigma_y = |1><0| + |0><1|
    sigma_z = i (|0><1| - |1><0|)

so that ``H0 = (Delta/2) sigma_x`` and the coupling is ``K = Q sigma_z``.
A density matrix is ``rho = (I + P . sigma) / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import constants as _sc

from .exceptions import DimensionError, InvalidStateError

__all__ = [
    "Constants",
    "CONSTANTS",
    "SystemParams",
    "PolarizationVector",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "bloch_to_density",
    "density_to_bloch",
    "validate_density_matrix",
    "entropy_of_polarization",
    "entropy_of_norms",
    "vonneumann_entropy",
]

PURITY_EPS = 1e-9
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
EIGEN_FLOOR = -1e-10


@dataclass(frozen=True)
class Constants:
    hbar: float = _sc.physical_constants["reduced Planck constant in eV s"][0]
    kB: float = _sc.physical_constants["Boltzmann constant in eV/K"][0]
    c: float = _sc.c * 100.0  # cm/s
    # Gaussian-unit values used by the blackbody branch
    hbar_cgs: float = _sc.hbar * 1e7  # erg s
    e_esu: float = _sc.e * _sc.c * 10.0  # statC

    def kT_over_hbar(self, temperature):
        """Thermal frequency k_B T / hbar in rad/s."""
        return self.kB * temperature / self.hbar


CONSTANTS = Constants()


@dataclass(frozen=True)
class SystemParams:
    """Parameters of the driven two-state system.

    Parameters
    ----------
    omega : float
        Level splitting as an angular frequency (rad/s), ``Delta = hbar*omega``.
    alpha : float
        Dimensionless effective coupling ``gamma Q^2 / hbar``.
    temperature : float
        Bath temperature in K.
    dt : float
        Integration step in s.
    """

    omega: float = 3.0e7
    alpha: float = 1.0e-4
    temperature: float = 1.0e-3
    dt: float = 0.658e-9

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be > 0, got {self.omega!r}")
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha!r}")
        if not self.temperature >= 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature!r}")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt!r}")

    @property
    def Delta(self):
        """Level splitting in eV."""
        return CONSTANTS.hbar * self.omega

    @property
    def A_fi(self):
        """Spontaneous decay rate 2*alpha*omega (1/s)."""
        return 2.0 * self.alpha * self.omega

    @property
    def kT_over_hbar(self):
        return CONSTANTS.kT_over_hbar(self.temperature)

    @property
    def lam(self):
        """Noise-induced transition rate 2*alpha*k_B*T/hbar (1/s)."""
        return 2.0 * self.alpha * self.kT_over_hbar

    # `lambda` is a keyword; expose the rate under its natural name too.
    @property
    def lambda_(self):
        return self.lam

    def replace(self, **changes):
        fields = dict(omega=self.omega, alpha=self.alpha,
                      temperature=self.temperature, dt=self.dt)
        fields.update(changes)
        return SystemParams(**fields)


class PolarizationVector(NamedTuple):
    px: float
    py: float
    pz: float

    @property
    def norm(self):
        return math.sqrt(self.px * self.px + self.py * self.py + self.pz * self.pz)

    @property
    def is_pure(self):
        return abs(self.norm - 1.0) <= PURITY_EPS

    def as_array(self):
        return np.array([self.px, self.py, self.pz], dtype=float)

    @classmethod
    def from_angle(cls, phi):
        """Initial state ``(cos phi, 0, sin phi)``."""
        return cls(math.cos(phi), 0.0, math.sin(phi))


SIGMA_X = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Z = np.array([[0.0, 1.0j], [-1.0j, 0.0]], dtype=complex)
_PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)


def _check_polarization(p):
    p = PolarizationVector(*map(float, p))
    if p.norm > 1.0 + PURITY_EPS:
        raise InvalidStateError(f"|P| = {p.norm:.15g} exceeds 1")
    return p


def bloch_to_density(p):
    """Return ``(I + P.sigma)/2`` as a 2x2 complex array."""
    px, py, pz = _check_polarization(p)
    return 0.5 * (np.eye(2, dtype=complex) + px * SIGMA_X + py * SIGMA_Y + pz * SIGMA_Z)


def validate_density_matrix(rho, *, hermitian_tol=HERMITIAN_TOL, trace_tol=TRACE_TOL):
    """Check the density-matrix invariants and return ``rho`` as a complex array.

    Raises
    ------
    DimensionError
        If ``rho`` is not square.
    InvalidStateError
        If it is not Hermitian, not unit trace, or has a negative eigenvalue
        below ``-1e-10``.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"density matrix must be square, got shape {rho.shape}")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > hermitian_tol:
        raise InvalidStateError(f"density matrix not Hermitian (max deviation {herm:.3g})")
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_tol:
        raise InvalidStateError(f"density matrix trace is {tr.real:.15g}, expected 1")
    w = np.linalg.eigvalsh(rho)
    if w[0] < EIGEN_FLOOR:
        raise InvalidStateError(f"density matrix has negative eigenvalue {w[0]:.3g}")
    return rho


def density_to_bloch(rho):
    """Polarization vector ``P_i = Tr(rho sigma_i)`` of a 2x2 density matrix."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise DimensionError(f"expected a 2x2 density matrix, got shape {rho.shape}")
    return PolarizationVector(*(float(np.real(np.trace(rho @ s))) for s in _PAULI))


def _binary_entropy(w0, w1):
    return -sum(w * math.log(w) for w in (w0, w1) if w > 0.0)


def entropy_of_polarization(p_avg):
    """Von Neumann entropy (nats) of the two-level state with polarization ``p_avg``.

    Accepts a ``PolarizationVector``/3-sequence, or a bare length ``|P|``.
    """
    if np.ndim(p_avg) == 0:
        r = float(p_avg)
        if r < 0:
            raise InvalidStateError(f"|P| must be non-negative, got {r}")
    else:
        r = PolarizationVector(*map(float, p_avg)).norm
    if r > 1.0 + PURITY_EPS:
        raise InvalidStateError(f"|P| = {r:.15g} exceeds 1")
    r = min(r, 1.0)
    return _binary_entropy(0.5 * (1.0 + r), 0.5 * (1.0 - r))


def entropy_of_norms(norms):
    """Vectorized ``entropy_of_polarization`` over an array of ``|P|`` values."""
    r = np.asarray(norms, dtype=float)
    if np.any(r > 1.0 + PURITY_EPS):
        raise InvalidStateError("|P| exceeds 1 in entropy series")
    r = np.clip(r, 0.0, 1.0)
    w0 = 0.5 * (1.0 + r)
    w1 = 0.5 * (1.0 - r)
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = np.where(w0 > 0, w0 * np.log(np.where(w0 > 0, w0, 1.0)), 0.0)
        t1 = np.where(w1 > 0, w1 * np.log(np.where(w1 > 0, w1, 1.0)), 0.0)
    return -(t0 + t1)


def vonneumann_entropy(rho):
    """``-Tr(rho ln rho)`` in nats, with ``0 ln 0 = 0``."""
    rho = validate_density_matrix(rho)
    w = np.clip(np.linalg.eigvalsh(rho), 0.0, None)
    w = w[w > 0.0]
    return float(-np.sum(w * np.log(w)))
