"""Seed-deterministic white noise for the effective field.

Each trajectory owns a stream keyed by ``(master_seed, trajectory_index)``.
Samples are generated in fixed-size blocks; block ``b`` of a stream comes
from a Philox counter-based generator seeded by
``SeedSequence(master_seed, spawn_key=(trajectory_index, b))``.  Sample ``n``
is therefore a pure function of ``(master_seed, trajectory_index, n)`` and
does not depend on how many samples were drawn before, or by whom.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["NoiseStream", "effective_field_sigma", "next_sample", "BLOCK_SIZE"]

BLOCK_SIZE = 1 << 16
DEFAULT_SEED = 42


def effective_field_sigma(params):
    """Per-step standard deviation of the effective field ``eta`` (rad/s).

    The bath force is ``xi_n = R_n sqrt(2 k_B T gamma / dt)``; with the
    coupling amplitude absorbed into ``alpha`` the field ``eta = 2 Q xi / hbar``
    has variance ``8 alpha (k_B T / hbar) / dt``.
    """
    return math.sqrt(8.0 * params.alpha * params.kT_over_hbar / params.dt)


def _block(master_seed, trajectory_index, block_index):
    ss = np.random.SeedSequence(master_seed, spawn_key=(trajectory_index, block_index))
    return np.random.Generator(np.random.Philox(ss)).standard_normal(BLOCK_SIZE)


class NoiseStream:
    """Gaussian samples ``sigma * R_n`` for one trajectory.

    Parameters
    ----------
    master_seed : int
        Non-negative 64-bit seed shared by the whole ensemble.
    trajectory_index : int
        Selects an independent substream.
    sigma : float
        Standard deviation of every sample.  ``sigma == 0`` yields zeros
        without touching the generator.
    cursor : int
        Index of the next sample returned by :meth:`next` / :meth:`take`.
    """

    def __init__(self, master_seed=DEFAULT_SEED, trajectory_index=0, sigma=1.0, cursor=0):
        if master_seed < 0 or master_seed >= 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if trajectory_index < 0:
            raise ValueError("trajectory_index must be non-negative")
        if sigma < 0:
            raise ValueError("sigma must be non-negative")
        self.master_seed = int(master_seed)
        self.trajectory_index = int(trajectory_index)
        self.sigma = float(sigma)
        self.cursor = int(cursor)
        self._cached_index = -1
        self._cached = None

    def __repr__(self):
        return (f"NoiseStream(master_seed={self.master_seed}, "
                f"trajectory_index={self.trajectory_index}, sigma={self.sigma!r}, "
                f"cursor={self.cursor})")

    def _get_block(self, b):
        if b != self._cached_index:
            self._cached = _block(self.master_seed, self.trajectory_index, b)
            self._cached_index = b
        return self._cached

    def standard(self, start, n):
        """Unit-variance samples ``R_start .. R_{start+n-1}`` (does not move the cursor)."""
        out = np.empty(n)
        pos = 0
        k = start
        while pos < n:
            b, off = divmod(k, BLOCK_SIZE)
            m = min(BLOCK_SIZE - off, n - pos)
            out[pos:pos + m] = self._get_block(b)[off:off + m]
            pos += m
            k += m
        return out

    def samples(self, start, n):
        if self.sigma == 0.0:
            return np.zeros(n)
        return self.sigma * self.standard(start, n)

    def take(self, n):
        """Return the next ``n`` samples and advance the cursor."""
        out = self.samples(self.cursor, n)
        self.cursor += n
        return out

    def next(self):
        return float(self.take(1)[0])


def next_sample(stream):
    """Draw one sample from ``stream`` and advance its cursor."""
    return stream.next()
