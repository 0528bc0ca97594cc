"""General N-level stochastic non-linear Liouville integrator.

The density matrix evolves under ``d rho/dt = -i [H_eff, rho]`` with
``H_eff = H0 - K (xi + f_rho)`` (hbar = 1, all operators in rad/s except the
dimensionless ``K``).  The friction ``f_rho`` is the retarded convolution of
the memory kernel with ``dQ/dt``, ``Q = Tr(K rho)``:

* delta kernel ``w delta(t)``: ``f = -(w/2) dQ/dt``, with ``dQ/dt`` taken
  from the instantaneous identity ``dQ/dt = i Tr(rho [H0, K])``;
* sampled kernel: trapezoidal convolution over the stored ``Q`` history,
  frozen for the duration of a step.

Each step is a Runge-Kutta-Munthe-Kaas update in u(N): the state is moved
only by unitary conjugations, so every ``Tr(rho^k)`` is conserved.
"""

from __future__ import annotations

import math
from collections import deque
from pathlib import Path

import numpy as np

from .exceptions import DimensionError, NumericalAbort
from .physcore import CONSTANTS, SIGMA_X, SIGMA_Z
from .spectral import DeltaKernel, SampledKernel

__all__ = [
    "LiouvilleSystem",
    "MAX_DIM",
    "q_expectation",
    "q_dot",
    "friction_force",
    "step_density",
    "dissipated_power_general",
    "xi_sigma",
    "two_level_system",
    "load_operator",
    "save_operator",
]

MAX_DIM = 16
_HERM_TOL = 1e-12


def _hermitian(name, a):
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    if a.shape[0] > MAX_DIM:
        raise DimensionError(f"{name} has dimension {a.shape[0]} > {MAX_DIM}")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.conj().T)) > _HERM_TOL * scale:
        raise ValueError(f"{name} is not Hermitian")
    return 0.5 * (a + a.conj().T)


class LiouvilleSystem:
    """Operators, kernel and friction history of one integrator instance.

    Parameters
    ----------
    h0 : (N, N) array
        System Hamiltonian in rad/s.
    k : (N, N) array
        Dimensionless coupling operator.
    kernel : DeltaKernel or SampledKernel
        Memory kernel in the same units as the coupling (an Ohmic bath with
        coupling ``alpha`` has ``DeltaKernel(2 * alpha)``).
    dt : float
        Step size in s.
    """

    def __init__(self, h0, k, kernel, dt):
        self.h0 = _hermitian("h0", h0)
        self.k = _hermitian("k", k)
        if self.h0.shape != self.k.shape:
            raise DimensionError("h0 and k must have the same shape")
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.kernel = kernel
        self.dt = float(dt)
        self.commutator = self.h0 @ self.k - self.k @ self.h0
        if isinstance(kernel, DeltaKernel):
            capacity = 2
        elif isinstance(kernel, SampledKernel):
            if not math.isclose(kernel.spacing, dt, rel_tol=1e-9):
                raise ValueError("sampled kernel spacing must equal dt")
            capacity = max(2, kernel.values.size + 1)
        else:
            raise TypeError(f"unsupported kernel {type(kernel).__name__}")
        self.history = deque(maxlen=capacity)

    @property
    def dim(self):
        return self.h0.shape[0]

    def reset(self, rho):
        self.history.clear()
        self.history.append(q_expectation(self.k, rho))

    def effective_hamiltonian(self, rho, xi, f_frozen=None):
        if f_frozen is None:
            f = -0.5 * self.kernel.weight * q_dot(self.h0, self.k, rho,
                                                  commutator=self.commutator)
        else:
            f = f_frozen
        return self.h0 - (xi + f) * self.k


def q_expectation(k, rho):
    """``Q_rho = Re Tr(K rho)``."""
    k = np.asarray(k)
    rho = np.asarray(rho)
    if k.shape != rho.shape:
        raise DimensionError(f"shape mismatch: K {k.shape} vs rho {rho.shape}")
    return float(np.real(np.einsum("ij,ji->", k, rho)))


def q_dot(h0, k, rho, commutator=None):
    """``dQ_rho/dt = i Tr(rho [H0, K])``, exact along the Liouville flow."""
    c = commutator if commutator is not None else h0 @ k - k @ h0
    return float(np.real(1j * np.einsum("ij,ji->", rho, c)))


def friction_force(history, kernel, dt):
    """Friction ``f(t_n) = -int_0^t Gamma(t_n - t') dQ/dt' dt'`` from a ``Q`` history.

    ``history`` holds ``Q`` at uniformly spaced times, oldest first, the last
    entry being the current time.  ``dQ/dt`` is a backward difference.
    """
    q = np.asarray(history, dtype=float)
    if q.size == 0:
        raise ValueError("friction needs a non-empty Q history")
    if q.size < 2:
        raise ValueError("friction needs at least two history entries")
    qdot = np.diff(q) / dt  # at t_1 .. t_n
    if isinstance(kernel, DeltaKernel):
        return -0.5 * kernel.weight * qdot[-1]
    if isinstance(kernel, SampledKernel):
        lags = dt * np.arange(qdot.size - 1, -1, -1)
        integrand = kernel(lags) * qdot
        if integrand.size == 1:
            return -0.5 * dt * integrand[0]
        return -dt * (integrand.sum() - 0.5 * (integrand[0] + integrand[-1]))
    raise TypeError(f"unsupported kernel {type(kernel).__name__}")


def _expm_antihermitian(u):
    """``exp(u)`` for anti-Hermitian ``u`` via the spectrum of ``i u``."""
    h = 1j * u
    h = 0.5 * (h + h.conj().T)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w)) @ v.conj().T


def _conj(u, rho):
    U = _expm_antihermitian(u)
    return U @ rho @ U.conj().T


def step_density(rho, system, xi, dt=None):
    """Advance ``rho`` by one step with the noise ``xi`` frozen.

    The new ``Q_rho`` is appended to ``system.history``.
    """
    dt = system.dt if dt is None else float(dt)
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != system.h0.shape:
        raise DimensionError(f"rho shape {rho.shape} does not match system {system.h0.shape}")
    if not system.history:
        system.reset(rho)
    if isinstance(system.kernel, SampledKernel):
        f = friction_force(system.history, system.kernel, dt) if len(system.history) >= 2 else 0.0
    else:
        f = None

    def F(r):
        return -1j * dt * system.effective_hamiltonian(r, xi, f)

    def comm(a, b):
        return a @ b - b @ a

    k1 = F(rho)
    k2 = F(_conj(0.5 * k1, rho))
    k3 = F(_conj(0.5 * k2 - comm(k1, k2) / 8.0, rho))
    k4 = F(_conj(k3, rho))
    theta = (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0 - comm(k1, k4) / 12.0
    new = _conj(theta, rho)
    new = 0.5 * (new + new.conj().T)
    if not np.all(np.isfinite(new)):
        raise NumericalAbort("non-finite density matrix", state=rho)
    system.history.append(q_expectation(system.k, new))
    return new


def dissipated_power_general(rho, h0, k, gamma):
    """Power drained by Ohmic friction, ``gamma |Tr(rho [H0, K])|^2`` (rad/s^2).

    ``gamma`` is the friction constant in kernel units, or a ``DeltaKernel``
    (``gamma = weight / 2``).  Multiply by hbar for eV/s.
    """
    if isinstance(gamma, SampledKernel):
        raise TypeError("closed-form dissipated power needs an Ohmic (delta) kernel")
    if isinstance(gamma, DeltaKernel):
        gamma = 0.5 * gamma.weight
    c = np.asarray(h0) @ np.asarray(k) - np.asarray(k) @ np.asarray(h0)
    return float(gamma * abs(np.einsum("ij,ji->", np.asarray(rho), c)) ** 2)


def xi_sigma(kernel, temperature, dt):
    """Per-step standard deviation of the white noise ``xi`` (rad/s).

    A sampled kernel is replaced by the delta kernel of equal total area.
    """
    if isinstance(kernel, DeltaKernel):
        w = kernel.weight
    else:
        v = kernel.values
        w = 2.0 * kernel.spacing * (v.sum() - 0.5 * (v[0] + v[-1]))
    return math.sqrt(max(w, 0.0) * CONSTANTS.kT_over_hbar(temperature) / dt)


def two_level_system(params):
    """The two-state model: ``H0 = (omega/2) sigma_x``, ``K = sigma_z``, Ohmic friction.

    Driven with ``xi = eta / 2`` this reproduces the polarization-vector
    equations of :mod:`stochliouville.bloch`.
    """
    return LiouvilleSystem(0.5 * params.omega * SIGMA_X, SIGMA_Z,
                           DeltaKernel(2.0 * params.alpha), params.dt)


def load_operator(path):
    """Read an operator: a dimension line, then ``N*N`` row-major ``re,im`` tokens."""
    path = Path(path)
    tokens = []
    dim = None
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if dim is None:
            try:
                dim = int(line)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected the dimension, got {line!r}") from None
            if not 1 <= dim <= MAX_DIM:
                raise ValueError(f"{path}:{lineno}: dimension {dim} outside 1..{MAX_DIM}")
            continue
        for tok in line.split():
            try:
                re_s, im_s = tok.split(",")
                tokens.append(complex(float(re_s), float(im_s)))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad entry {tok!r} (expected re,im)") from None
    if dim is None:
        raise ValueError(f"{path}: empty operator file")
    if len(tokens) != dim * dim:
        raise ValueError(f"{path}: expected {dim * dim} entries, got {len(tokens)}")
    return np.array(tokens, dtype=complex).reshape(dim, dim)


def save_operator(path, a):
    a = np.asarray(a, dtype=complex)
    lines = [str(a.shape[0])]
    for row in a:
        lines.append(" ".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in row))
    Path(path).write_text("\n".join(lines) + "\n")
