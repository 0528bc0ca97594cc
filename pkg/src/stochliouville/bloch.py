"""Stochastic integrator for the two-state polarization vector.

Equations of motion (hbar = 1, coupling amplitude absorbed into alpha)::

    dPx/dt =  b Py
    dPy/dt = -omega Pz - b Px
    dPz/dt =  omega Py
    b      =  eta(t) - 2 alpha omega Py

i.e. ``dP/dt = B(P) x P`` with ``B = (omega, 0, -b)``.  The field ``eta`` is
held constant over each step.  Along with ``P`` the integrator carries the
dissipation coordinate ``Pxd`` with ``dPxd/dt = A_fi Py^2``.

Two fixed-step schemes are available:

``"rkmk4"`` (default)
    Fourth-order Runge-Kutta-Munthe-Kaas on SO(3).  Every update is an exact
    rotation, so ``|P|`` is conserved to rounding error.
``"rk4"``
    Classical Runge-Kutta on the three components.  Same order, but ``|P|``
    drifts by ~(|B| dt)^6 / 144 per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .exceptions import NumericalAbort
from .noise import BLOCK_SIZE, NoiseStream
from .physcore import PURITY_EPS, PolarizationVector

__all__ = [
    "TssState",
    "Trajectory",
    "effective_field",
    "step",
    "integrate_trajectory",
    "dissipated_power",
    "n_steps_for",
    "METHODS",
]

METHODS = ("rkmk4", "rk4")


class TssState(NamedTuple):
    p: PolarizationVector
    p_x_d: float = 0.0
    t: float = 0.0


def effective_field(p, eta, params):
    """Rotation vector ``(b_x, 0, b_z)`` of the step map, in rad/s."""
    return (params.omega, 0.0, -(eta - 2.0 * params.alpha * params.omega * p[1]))


def dissipated_power(state, params):
    """Instantaneous ``dPxd/dt = A_fi * Py^2`` (1/s)."""
    py = state.p[1] if isinstance(state, TssState) else state[1]
    return params.A_fi * py * py


@njit(cache=True, inline="always")
def _rotate(u0, u1, u2, p0, p1, p2):
    th = math.sqrt(u0 * u0 + u1 * u1 + u2 * u2)
    if th == 0.0:
        return p0, p1, p2
    c = math.cos(th)
    s = math.sin(th)
    k0 = u0 / th
    k1 = u1 / th
    k2 = u2 / th
    kd = (k0 * p0 + k1 * p1 + k2 * p2) * (1.0 - c)
    return (p0 * c + (k1 * p2 - k2 * p1) * s + k0 * kd,
            p1 * c + (k2 * p0 - k0 * p2) * s + k1 * kd,
            p2 * c + (k0 * p1 - k1 * p0) * s + k2 * kd)


@njit(cache=True, nogil=True)
def _advance_rkmk4(state, eta, omega, alpha, dt, stride, step0, renorm, out):
    p0, p1, p2, pxd = state[0], state[1], state[2], state[3]
    wdt = omega * dt
    fr = 2.0 * alpha * omega
    afi_dt6 = fr * dt / 6.0
    for i in range(eta.shape[0]):
        e = eta[i]
        # stage vectors are dt * B(Y_k); the x-component is always omega*dt
        a2 = -(e - fr * p1) * dt
        y1 = p1
        q0, q1, q2 = _rotate(0.5 * wdt, 0.0, 0.5 * a2, p0, p1, p2)
        b2 = -(e - fr * q1) * dt
        y2 = q1
        # [k1, k2] for k1 = (wdt, 0, a2), k2 = (wdt, 0, b2)
        c1 = a2 * wdt - wdt * b2
        r0, r1, r2 = _rotate(0.5 * wdt, -c1 / 8.0, 0.5 * b2, p0, p1, p2)
        g2 = -(e - fr * r1) * dt
        y3 = r1
        s0, s1, s2 = _rotate(wdt, 0.0, g2, p0, p1, p2)
        h2 = -(e - fr * s1) * dt
        y4 = s1
        m1 = a2 * wdt - wdt * h2
        p0, p1, p2 = _rotate(wdt, -m1 / 12.0, (a2 + 2.0 * b2 + 2.0 * g2 + h2) / 6.0,
                             p0, p1, p2)
        pxd += afi_dt6 * (y1 * y1 + 2.0 * y2 * y2 + 2.0 * y3 * y3 + y4 * y4)
        n = step0 + i + 1
        if renorm > 0 and n % renorm == 0:
            nrm = math.sqrt(p0 * p0 + p1 * p1 + p2 * p2)
            p0 /= nrm
            p1 /= nrm
            p2 /= nrm
        if not (math.isfinite(p0) and math.isfinite(p1) and math.isfinite(p2)
                and math.isfinite(pxd)):
            return i
        state[0], state[1], state[2], state[3] = p0, p1, p2, pxd
        if n % stride == 0:
            k = n // stride
            out[k, 0] = p0
            out[k, 1] = p1
            out[k, 2] = p2
            out[k, 3] = pxd
    return -1


@njit(cache=True, inline="always")
def _rhs(p0, p1, p2, e, omega, fr):
    b = e - fr * p1
    return b * p1, -omega * p2 - b * p0, omega * p1


@njit(cache=True, nogil=True)
def _advance_rk4(state, eta, omega, alpha, dt, stride, step0, renorm, out):
    p0, p1, p2, pxd = state[0], state[1], state[2], state[3]
    fr = 2.0 * alpha * omega
    h = 0.5 * dt
    for i in range(eta.shape[0]):
        e = eta[i]
        k10, k11, k12 = _rhs(p0, p1, p2, e, omega, fr)
        y1 = p1
        y2 = p1 + h * k11
        k20, k21, k22 = _rhs(p0 + h * k10, y2, p2 + h * k12, e, omega, fr)
        y3 = p1 + h * k21
        k30, k31, k32 = _rhs(p0 + h * k20, y3, p2 + h * k22, e, omega, fr)
        y4 = p1 + dt * k31
        k40, k41, k42 = _rhs(p0 + dt * k30, y4, p2 + dt * k32, e, omega, fr)
        p0 += dt * (k10 + 2.0 * k20 + 2.0 * k30 + k40) / 6.0
        p1 += dt * (k11 + 2.0 * k21 + 2.0 * k31 + k41) / 6.0
        p2 += dt * (k12 + 2.0 * k22 + 2.0 * k32 + k42) / 6.0
        pxd += fr * dt * (y1 * y1 + 2.0 * y2 * y2 + 2.0 * y3 * y3 + y4 * y4) / 6.0
        n = step0 + i + 1
        if renorm > 0 and n % renorm == 0:
            nrm = math.sqrt(p0 * p0 + p1 * p1 + p2 * p2)
            p0 /= nrm
            p1 /= nrm
            p2 /= nrm
        if not (math.isfinite(p0) and math.isfinite(p1) and math.isfinite(p2)
                and math.isfinite(pxd)):
            return i
        state[0], state[1], state[2], state[3] = p0, p1, p2, pxd
        if n % stride == 0:
            k = n // stride
            out[k, 0] = p0
            out[k, 1] = p1
            out[k, 2] = p2
            out[k, 3] = pxd
    return -1


_KERNELS = {"rkmk4": _advance_rkmk4, "rk4": _advance_rk4}


def _kernel(method):
    try:
        return _KERNELS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}") from None


def step(state, eta, params, method="rkmk4"):
    """Advance ``state`` by one ``params.dt`` with the field ``eta`` frozen."""
    buf = np.array([state.p[0], state.p[1], state.p[2], state.p_x_d], dtype=float)
    out = np.empty((1, 4))
    bad = _kernel(method)(buf, np.array([float(eta)]), params.omega, params.alpha,
                          params.dt, 1 << 62, 0, 0, out)
    if bad >= 0:
        raise NumericalAbort("non-finite state after one step", step=0, state=tuple(state))
    return TssState(PolarizationVector(buf[0], buf[1], buf[2]), float(buf[3]),
                    state.t + params.dt)


def n_steps_for(t_max, dt, stride):
    """Number of steps (a multiple of ``stride``) needed to reach ``t_max``."""
    if stride < 1:
        raise ValueError("record_stride must be >= 1")
    n = max(1, math.ceil(t_max / dt - 1e-9))
    return stride * math.ceil(n / stride)


def _run_records(p0, pxd0, params, stream, n_steps, stride, method="rkmk4", renormalize_every=0):
    """Integrate ``n_steps`` and return the ``(n_steps//stride + 1, 4)`` record array."""
    kernel = _kernel(method)
    out = np.empty((n_steps // stride + 1, 4))
    state = np.array([p0[0], p0[1], p0[2], pxd0], dtype=float)
    out[0] = state
    done = 0
    zeros = np.zeros(min(BLOCK_SIZE, n_steps)) if stream.sigma == 0.0 else None
    while done < n_steps:
        m = min(BLOCK_SIZE, n_steps - done)
        eta = zeros[:m] if zeros is not None else stream.take(m)
        bad = kernel(state, eta, params.omega, params.alpha, params.dt, stride, done,
                     int(renormalize_every or 0), out)
        if bad >= 0:
            k = done + bad
            raise NumericalAbort(
                f"non-finite state at step {k} (t = {k * params.dt:.6g} s); "
                f"last finite state P=({state[0]:.17g}, {state[1]:.17g}, {state[2]:.17g}), "
                f"Pxd={state[3]:.17g}",
                step=k, state=tuple(state),
                trajectory=stream.trajectory_index)
        done += m
    return out


@dataclass
class Trajectory:
    """Recorded time series of one noise realization."""

    t: np.ndarray
    p: np.ndarray  # (n, 3)
    pxd: np.ndarray

    @property
    def norm(self):
        return np.sqrt(np.sum(self.p ** 2, axis=1))

    def state(self, i):
        return TssState(PolarizationVector(*self.p[i]), float(self.pxd[i]), float(self.t[i]))

    def to_csv(self, path):
        data = np.column_stack([self.t, self.p, self.pxd])
        np.savetxt(path, data, delimiter=",", fmt="%.17g",
                   header="t_s,Px,Py,Pz,Pxd", comments="")


def integrate_trajectory(p0, params, stream=None, t_max=1e-6, record_stride=1,
                         method="rkmk4", renormalize_every=None, require_pure=True):
    """Integrate one trajectory from ``p0``.

    Parameters
    ----------
    p0 : PolarizationVector or sequence
        Initial polarization; must be pure unless ``require_pure=False``.
    params : SystemParams
    stream : NoiseStream, optional
        Source of the per-step field.  ``None`` runs without noise.
    t_max : float
        Horizon in s; the final recorded time is ``>= t_max``.
    record_stride : int
        Record every this many steps (the initial state is always recorded).
    method : {"rkmk4", "rk4"}
    renormalize_every : int, optional
        Rescale ``|P|`` to 1 every N steps.  Off by default.

    Raises
    ------
    NumericalAbort
        On a non-finite state, with the step index and last finite state.
    """
    p0 = PolarizationVector(*map(float, p0))
    if require_pure and abs(p0.norm - 1.0) > PURITY_EPS:
        raise ValueError(f"initial state must be pure, |P0| = {p0.norm!r}")
    if stream is None:
        stream = NoiseStream(sigma=0.0)
    n = n_steps_for(t_max, params.dt, record_stride)
    rec = _run_records(p0, 0.0, params, stream, n, record_stride, method,
                       renormalize_every or 0)
    t = params.dt * record_stride * np.arange(rec.shape[0])
    return Trajectory(t, rec[:, :3].copy(), rec[:, 3].copy())

