"""Ensembles of independent noise trajectories and their averages.

Trajectories are split into fixed chunks of ``CHUNK_SIZE`` consecutive
indices.  Within a chunk the records are summed in index order; chunk sums
are then combined by pairwise summation in chunk order.  Neither step
depends on how many workers ran the chunks, so the averages are
bit-identical for any worker count.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .bloch import METHODS, _run_records, n_steps_for
from .noise import DEFAULT_SEED, NoiseStream, effective_field_sigma
from .physcore import PolarizationVector, SystemParams, entropy_of_norms

__all__ = [
    "EnsembleConfig",
    "EnsembleResult",
    "run_ensemble",
    "entropy_track",
    "default_workers",
    "CHUNK_SIZE",
]

CHUNK_SIZE = 8
CSV_HEADER = "t_s,avg_Px,avg_Py,avg_Pz,stderr_Px,stderr_Py,stderr_Pz,S,avg_Pxd"


def default_workers():
    """Worker count: CPU count, capped by the ``SIM_THREADS`` environment variable."""
    n = os.cpu_count() or 1
    env = os.environ.get("SIM_THREADS")
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise ValueError(f"SIM_THREADS must be an integer, got {env!r}") from None
        if cap >= 1:
            n = min(n, cap)
    return max(1, n)


@dataclass(frozen=True)
class EnsembleConfig:
    n_trajectories: int = 1000
    master_seed: int = DEFAULT_SEED
    params: SystemParams = field(default_factory=SystemParams)
    phi: float = 0.0
    t_max: float = 0.25e-3
    record_stride: int = 100
    noiseless: bool = False
    method: str = "rkmk4"

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")
        if not 0.0 <= self.phi < 2.0 * math.pi:
            raise ValueError("phi must lie in [0, 2 pi)")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")

    @property
    def p0(self):
        return PolarizationVector.from_angle(self.phi)

    @property
    def sigma(self):
        return 0.0 if self.noiseless else effective_field_sigma(self.params)


@dataclass
class EnsembleResult:
    t: np.ndarray
    avg_p: np.ndarray  # (n, 3)
    stderr_p: np.ndarray  # (n, 3)
    entropy: np.ndarray
    avg_pxd: np.ndarray
    stderr_pxd: np.ndarray
    max_norm_deviation: float
    metadata: dict = field(default_factory=dict)

    @property
    def avg_norm(self):
        return np.sqrt(np.sum(self.avg_p ** 2, axis=1))

    def to_csv(self, path):
        data = np.column_stack([self.t, self.avg_p, self.stderr_p, self.entropy, self.avg_pxd])
        np.savetxt(path, data, delimiter=",", fmt="%.17g", header=CSV_HEADER, comments="")

    def write_metadata(self, path):
        with open(path, "w") as fh:
            json.dump(self.metadata, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _chunk_sums(cfg, start, stop, n_steps):
    s = ss = None
    maxdev = 0.0
    sigma = cfg.sigma
    for r in range(start, stop):
        stream = NoiseStream(cfg.master_seed, r, sigma)
        rec = _run_records(cfg.p0, 0.0, cfg.params, stream, n_steps, cfg.record_stride,
                           cfg.method)
        if s is None:
            s = rec.copy()
            ss = rec * rec
        else:
            s += rec
            ss += rec * rec
        dev = np.max(np.abs(np.sqrt(np.sum(rec[:, :3] ** 2, axis=1)) - 1.0))
        maxdev = max(maxdev, float(dev))
    return s, ss, maxdev


def _pairwise(parts):
    while len(parts) > 1:
        nxt = [parts[i] + parts[i + 1] for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def run_ensemble(cfg, workers=None):
    """Integrate ``cfg.n_trajectories`` trajectories and average them.

    Trajectory ``r`` uses the noise substream ``(cfg.master_seed, r)``.

    Raises
    ------
    NumericalAbort
        From the first failing trajectory; its ``trajectory`` attribute holds
        the index.
    """
    workers = default_workers() if workers is None else max(1, int(workers))
    n_steps = n_steps_for(cfg.t_max, cfg.params.dt, cfg.record_stride)
    bounds = [(a, min(a + CHUNK_SIZE, cfg.n_trajectories))
              for a in range(0, cfg.n_trajectories, CHUNK_SIZE)]
    t0 = time.perf_counter()
    if workers == 1 or len(bounds) == 1:
        results = [_chunk_sums(cfg, a, b, n_steps) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda ab: _chunk_sums(cfg, ab[0], ab[1], n_steps), bounds))
    wall = time.perf_counter() - t0

    n = cfg.n_trajectories
    total = _pairwise([r[0] for r in results])
    total_sq = _pairwise([r[1] for r in results])
    mean = total / n
    if n > 1:
        var = np.clip((total_sq - n * mean * mean) / (n - 1), 0.0, None)
        stderr = np.sqrt(var / n)
    else:
        stderr = np.zeros_like(mean)
    maxdev = max(r[2] for r in results)

    t = cfg.params.dt * cfg.record_stride * np.arange(mean.shape[0])
    avg_p = mean[:, :3]
    meta = {
        "seed": cfg.master_seed,
        "params": asdict(cfg.params),
        "N_t": n,
        "dt": cfg.params.dt,
        "phi": cfg.phi,
        "t_max": cfg.t_max,
        "record_stride": cfg.record_stride,
        "noiseless": cfg.noiseless,
        "method": cfg.method,
        "wall_time_s": wall,
    }
    return EnsembleResult(
        t=t,
        avg_p=avg_p,
        stderr_p=stderr[:, :3],
        entropy=entropy_of_norms(np.sqrt(np.sum(avg_p ** 2, axis=1))),
        avg_pxd=mean[:, 3],
        stderr_pxd=stderr[:, 3],
        max_norm_deviation=maxdev,
        metadata=meta,
    )


def entropy_track(result):
    """Entropy of the ensemble-averaged state at every recorded time (nats)."""
    return entropy_of_norms(result.avg_norm)
