"""Command-line presets, config handling and data export.

::

    stochliouville run {fig1,fig2,fig3,rates,custom} [--config FILE] [options]
    stochliouville rates [--omega W] [--alpha A] [--temperature T]
    stochliouville validate FILE

Config files are flat ``key = value`` text; ``#`` starts a comment.  Command
line flags override file values.  Exit codes: 0 success, 2 configuration
error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import analysis
from .bloch import METHODS, integrate_trajectory
from .ensemble import EnsembleConfig, default_workers, run_ensemble
from .exceptions import ConfigError, FitError, NumericalAbort
from .noise import DEFAULT_SEED, effective_field_sigma
from .physcore import CONSTANTS, SystemParams
from .rates import rate_noise, rates_quantized
from .spectral import Ohmic

__all__ = ["RunConfig", "parse_config", "validate_config", "run_preset", "main",
           "EXIT_OK", "EXIT_CONFIG", "EXIT_ABORT"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ABORT = 3

PRESETS = ("fig1", "fig2", "fig3", "rates", "custom")
QUICK_N_TRAJECTORIES = 200
QUICK_T_MAX = 0.1e-3

_PRESET_DEFAULTS = {
    "fig1": dict(phi=0.0, record_stride=100, t_max=0.25e-3),
    "fig2": dict(phi=math.pi / 2, record_stride=10, t_max=0.25e-3),
    "fig3": dict(phi=math.pi / 2, record_stride=100, t_max=1.5e-3),
    "rates": dict(phi=0.0, record_stride=100, t_max=0.25e-3),
    "custom": dict(phi=0.0, record_stride=100, t_max=0.25e-3),
}


@dataclass(frozen=True)
class RunConfig:
    """Everything a preset run needs.

    ``phi``, ``t_max`` and ``record_stride`` default to ``None``, meaning
    "use the preset's value".
    """

    preset: str = "custom"
    seed: int = DEFAULT_SEED
    n_trajectories: int = 1000
    phi: float | None = None
    t_max: float | None = None
    record_stride: int | None = None
    noiseless: bool = False
    method: str = "rkmk4"
    omega: float = 3.0e7
    alpha: float = 1.0e-4
    temperature: float = 1.0e-3
    dt: float = 0.658e-9
    t_s: float = 0.4e-3
    plateau_after: float = 0.2e-3
    noiseless_t_max: float = 1.5e-3
    out: str = "results"
    quick: bool = False

    @property
    def params(self):
        return SystemParams(self.omega, self.alpha, self.temperature, self.dt)

    def resolved(self):
        """Copy with preset defaults and ``quick`` applied."""
        d = _PRESET_DEFAULTS[self.preset]
        cfg = replace(self,
                      phi=d["phi"] if self.phi is None else self.phi,
                      t_max=d["t_max"] if self.t_max is None else self.t_max,
                      record_stride=(d["record_stride"] if self.record_stride is None
                                     else self.record_stride))
        if cfg.quick:
            cfg = replace(cfg, n_trajectories=min(cfg.n_trajectories, QUICK_N_TRAJECTORIES),
                          t_max=min(cfg.t_max, QUICK_T_MAX))
        return cfg

    def ensemble_config(self, phi=None, noiseless=None):
        c = self.resolved()
        return EnsembleConfig(
            n_trajectories=c.n_trajectories, master_seed=c.seed, params=c.params,
            phi=c.phi if phi is None else phi, t_max=c.t_max, record_stride=c.record_stride,
            noiseless=c.noiseless if noiseless is None else noiseless, method=c.method)


_FIELD_TYPES = {
    "preset": str, "seed": int, "n_trajectories": int, "phi": float, "t_max": float,
    "record_stride": int, "noiseless": bool, "method": str, "omega": float,
    "alpha": float, "temperature": float, "dt": float, "t_s": float,
    "plateau_after": float, "noiseless_t_max": float, "out": str, "quick": bool,
}
assert set(_FIELD_TYPES) == {f.name for f in fields(RunConfig)}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(key, raw):
    typ = _FIELD_TYPES[key]
    if typ is bool:
        v = raw.strip().lower()
        if v in _TRUE:
            return True
        if v in _FALSE:
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if typ is int:
        return int(raw)
    if typ is float:
        v = float(raw)
        if not math.isfinite(v):
            raise ValueError(f"expected a finite number, got {raw!r}")
        return v
    return raw.strip()


def _check_ranges(cfg):
    """Return ``(key, message)`` for the first out-of-range value, else ``None``."""
    checks = [
        ("preset", cfg.preset in PRESETS, f"must be one of {', '.join(PRESETS)}"),
        ("method", cfg.method in METHODS, f"must be one of {', '.join(METHODS)}"),
        ("seed", 0 <= cfg.seed < 2 ** 64, "must be a non-negative 64-bit integer"),
        ("n_trajectories", cfg.n_trajectories >= 1, "must be >= 1"),
        ("omega", cfg.omega > 0, "must be > 0"),
        ("alpha", cfg.alpha >= 0, "must be >= 0"),
        ("temperature", cfg.temperature >= 0, "must be >= 0"),
        ("dt", cfg.dt > 0, "must be > 0"),
        ("phi", cfg.phi is None or 0 <= cfg.phi < 2 * math.pi, "must lie in [0, 2 pi)"),
        ("t_max", cfg.t_max is None or cfg.t_max > 0, "must be > 0"),
        ("record_stride", cfg.record_stride is None or cfg.record_stride >= 1, "must be >= 1"),
        ("t_s", cfg.t_s >= 0, "must be >= 0"),
        ("plateau_after", cfg.plateau_after >= 0, "must be >= 0"),
        ("noiseless_t_max", cfg.noiseless_t_max > 0, "must be > 0"),
    ]
    for key, ok, msg in checks:
        if not ok:
            return key, f"{key} = {getattr(cfg, key)!r}: {msg}"
    return None


def parse_config(text, source="<config>", base=None):
    """Parse ``key = value`` lines into a :class:`RunConfig`.

    Raises
    ------
    ConfigError
        With ``source:line`` for syntax, unknown-key, type and range errors.
    """
    cfg = base or RunConfig()
    lines = {}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {body!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r} "
                              f"(first set on line {lines[key]})")
        try:
            values[key] = _convert(key, raw)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: {key}: {exc}") from None
        lines[key] = lineno
    cfg = replace(cfg, **values)
    bad = _check_ranges(cfg)
    if bad:
        key, msg = bad
        where = f"{source}:{lines[key]}" if key in lines else source
        raise ConfigError(f"{where}: {msg}")
    return cfg


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    return parse_config(text, str(path))


def effective_parameters(cfg):
    """Normalized parameter echo including derived quantities."""
    c = cfg.resolved()
    p = c.params
    d = asdict(c)
    d["derived"] = {
        "lambda": p.lam,
        "A_fi": p.A_fi,
        "sigma_eta": effective_field_sigma(p),
        "kT_over_hbar": p.kT_over_hbar,
        "kT_over_hbar_omega": p.kT_over_hbar / p.omega,
        "n_steps": math.ceil(c.t_max / p.dt - 1e-9),
    }
    return d


def validate_config(path):
    """Load and check a config file; return ``(RunConfig, echo dict)``."""
    cfg = load_config(path)
    return cfg, effective_parameters(cfg)


# ---------------------------------------------------------------- running


def _fit_or_error(fn, *args, **kw):
    try:
        rep = fn(*args, **kw)
    except FitError as exc:
        return {"error": str(exc)}
    if isinstance(rep, analysis.FitReport):
        return rep.to_dict()
    return rep


def _value_at(t, y, when):
    k = int(np.searchsorted(t, when - 1e-15))
    k = min(k, len(t) - 1)
    return {"t": float(t[k]), "value": float(y[k])}


def _plateau_after(c):
    # keep the tail window non-empty for short (e.g. quick) horizons
    return min(c.plateau_after, 0.5 * c.t_max)


def _ensemble_summary(res, c):
    t = res.t
    s = {
        "N_t": res.metadata["N_t"],
        "phi": res.metadata["phi"],
        "max_norm_deviation": res.max_norm_deviation,
        "entropy_final": float(res.entropy[-1]),
        "entropy_at_0.2ms": _value_at(t, res.entropy, 0.2e-3),
        "kappa_e": _fit_or_error(analysis.plateau_rate, t, res.avg_pxd, _plateau_after(c)),
    }
    try:
        s["tau_D"] = analysis.decoherence_time(t, res.avg_p)
    except FitError as exc:
        s["tau_D"] = {"error": str(exc)}
    return s


def _write_ensemble(res, out, stem, workers):
    res.to_csv(out / f"{stem}_ensemble.csv")
    meta = dict(res.metadata, workers=workers)
    with open(out / f"{stem}_ensemble.meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_summary(path, summary):
    with open(path, "w") as fh:
        json.dump(analysis._jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _header(c):
    p = c.params
    return {
        "preset": c.preset,
        "seed": c.seed,
        "params": asdict(p),
        "method": c.method,
        "t_max": c.t_max,
        "record_stride": c.record_stride,
        "quick": c.quick,
        "derived": {"lambda": p.lam, "A_fi": p.A_fi, "sigma_eta": effective_field_sigma(p)},
    }


def rate_table(params):
    """Rate table rows for the Ohmic two-state model at ``params``."""
    sd = Ohmic(params.alpha)
    rows = []
    for label, T in (("T", params.temperature),
                     ("kT=100hw", 100.0 * params.omega / CONSTANTS.kT_over_hbar(1.0))):
        q = rates_quantized(1.0, sd, params.omega, T)
        rows.append({
            "case": label,
            "omega": params.omega,
            "alpha": params.alpha,
            "temperature": T,
            "kT_over_hbar_omega": CONSTANTS.kT_over_hbar(T) / params.omega,
            "lambda_noise": rate_noise(1.0, T, sd, params.omega) if T > 0 else 0.0,
            "A_fi": q.a_spontaneous,
            "lambda_up": q.lambda_up_q,
            "lambda_down": q.lambda_down_q,
            "n_occ": q.occupation,
            "note": q.regime_note,
        })
    return rows


def _format_table(rows):
    cols = ["case", "kT_over_hbar_omega", "lambda_noise", "A_fi", "lambda_up",
            "lambda_down", "n_occ"]
    lines = ["  ".join(f"{c:>18}" for c in cols)]
    for r in rows:
        cells = [f"{r['case']:>18}"] + [f"{r[c]:>18.6g}" for c in cols[1:]]
        lines.append("  ".join(cells))
        if r["note"]:
            lines.append(f"  note: {r['note']}")
    return "\n".join(lines)


def _rates_csv(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def run_preset(cfg, workers=None, log=None):
    """Run ``cfg.preset`` and write its artifacts to ``cfg.out``.

    Returns the summary dict (also written as ``<preset>_summary.json``).
    Wall times and worker counts go only to the ``*.meta.json`` sidecars so
    that summaries and CSVs are byte-identical across worker counts.
    """
    c = cfg.resolved()
    log = log or (lambda msg: None)
    workers = default_workers() if workers is None else workers
    out = Path(c.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = _header(c)

    if c.preset == "rates":
        rows = rate_table(c.params)
        (out / "rates.txt").write_text(_format_table(rows) + "\n")
        (out / "rates.csv").write_text(_rates_csv(rows))
        log(_format_table(rows))
        summary["rates"] = rows
    elif c.preset in ("fig1", "fig2", "custom"):
        log(f"{c.preset}: {c.n_trajectories} trajectories, phi = {c.phi:g}, "
            f"t_max = {c.t_max:g} s, {workers} worker(s)")
        res = run_ensemble(c.ensemble_config(), workers=workers)
        _write_ensemble(res, out, c.preset, workers)
        s = _ensemble_summary(res, c)
        if c.preset == "fig1" or (c.preset == "custom" and c.phi == 0.0):
            s["decay_Px"] = _fit_or_error(analysis.fit_exponential, res.t, res.avg_p[:, 0])
            s["two_lambda_expected"] = 2.0 * c.params.lam
        if c.preset == "fig2" or (c.preset == "custom" and c.phi != 0.0):
            s["oscillation"] = _fit_or_error(analysis.fit_damped_oscillation, res.t,
                                             res.avg_p[:, 1], res.avg_p[:, 2])
            s["Px_max_abs_dev_over_stderr"] = _px_excursion(res)
        s["tau_D_expected_phi0"] = 1.0 / (2.0 * c.params.lam) if c.params.lam > 0 else None
        summary["ensemble"] = s
    elif c.preset == "fig3":
        summary.update(_run_fig3(c, workers, out, log))
    _write_summary(out / f"{c.preset}_summary.json", summary)
    return summary


def _px_excursion(res):
    se = res.stderr_p[1:, 0]
    dev = np.abs(res.avg_p[1:, 0] - res.avg_p[0, 0])
    m = se > 0
    return float(np.max(dev[m] / se[m])) if np.any(m) else None


def _run_fig3(c, workers, out, log):
    s = {}
    if not c.noiseless:
        for phi, stem in ((0.0, "fig3_phi0"), (math.pi / 2, "fig3_phi90")):
            log(f"fig3: ensemble phi = {phi:g}, {c.n_trajectories} trajectories")
            res = run_ensemble(c.ensemble_config(phi=phi, noiseless=False), workers=workers)
            _write_ensemble(res, out, stem, workers)
            s[stem] = _ensemble_summary(res, c)
    phi = c.phi
    log(f"fig3: noiseless trajectory phi = {phi:g}, t_max = {c.noiseless_t_max:g} s")
    tr = integrate_trajectory((math.cos(phi), 0.0, math.sin(phi)), c.params, None,
                              t_max=c.noiseless_t_max, record_stride=c.record_stride,
                              method=c.method)
    tr.to_csv(out / "fig3_noiseless.csv")
    p = c.params
    s["noiseless"] = {
        "phi": phi,
        "t_max": c.noiseless_t_max,
        "initial_slope": _fit_or_error(analysis.initial_slope, tr.t, tr.pxd),
        "kappa_0_expected": p.A_fi / 2.0,
        "asymptotic": _fit_or_error(analysis.asymptotic_pxd_check, tr.t, tr.pxd, c.t_s, 1.0,
                                    a_fi=p.A_fi),
        "A_fi": p.A_fi,
    }
    return s


# ---------------------------------------------------------------- argparse


def _add_param_flags(ap):
    g = ap.add_argument_group("parameter overrides")
    g.add_argument("--omega", type=float, help="level splitting (rad/s)")
    g.add_argument("--alpha", type=float, help="dimensionless coupling")
    g.add_argument("--temperature", type=float, help="bath temperature (K)")
    g.add_argument("--dt", type=float, help="time step (s)")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="stochliouville",
        description="Stochastic Liouville simulations of a two-state system in a heat bath.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset and write CSV/JSON artifacts")
    run.add_argument("preset", choices=PRESETS)
    run.add_argument("--config", help="key = value config file")
    run.add_argument("--out", help="output directory (default: results)")
    run.add_argument("--seed", type=int, help="master seed (default 42)")
    run.add_argument("--workers", type=int, help="worker threads (default: CPUs, capped by SIM_THREADS)")
    run.add_argument("--quick", action="store_true", default=None,
                     help=f"N_t = {QUICK_N_TRAJECTORIES}, t_max = {QUICK_T_MAX:g} s")
    run.add_argument("--phi", type=float, help="initial angle (rad)")
    run.add_argument("--noiseless", action="store_true", default=None)
    run.add_argument("--n-trajectories", type=int, dest="n_trajectories")
    run.add_argument("--t-max", type=float, dest="t_max")
    run.add_argument("--record-stride", type=int, dest="record_stride")
    run.add_argument("--method", choices=METHODS)
    _add_param_flags(run)

    rates = sub.add_parser("rates", help="print the rate table")
    rates.add_argument("--csv", action="store_true", help="emit CSV instead of text")
    _add_param_flags(rates)

    val = sub.add_parser("validate", help="check a config file and echo effective parameters")
    val.add_argument("path")
    return ap


_OVERRIDES = ("out", "seed", "quick", "phi", "noiseless", "n_trajectories", "t_max",
              "record_stride", "method", "omega", "alpha", "temperature", "dt")


def _config_from_args(args):
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    over = {k: getattr(args, k) for k in _OVERRIDES
            if getattr(args, k, None) is not None}
    if hasattr(args, "preset"):
        over["preset"] = args.preset
    cfg = replace(cfg, **over)
    bad = _check_ranges(cfg)
    if bad:
        raise ConfigError(f"command line: {bad[1]}")
    return cfg


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)

    def log(msg):
        print(msg, file=sys.stderr)

    try:
        if args.command == "validate":
            _, echo = validate_config(args.path)
            print(json.dumps(analysis._jsonable(echo), indent=2, sort_keys=True))
            return EXIT_OK
        cfg = _config_from_args(args)
        if args.command == "rates":
            rows = rate_table(cfg.params)
            print(_rates_csv(rows) if args.csv else _format_table(rows), end="" if args.csv else "\n")
            return EXIT_OK
        if args.workers is not None and args.workers < 1:
            raise ConfigError("command line: --workers must be >= 1")
        summary = run_preset(cfg, workers=args.workers, log=log)
        log(f"wrote {Path(cfg.out) / (cfg.preset + '_summary.json')}")
        if cfg.preset != "rates":
            print(json.dumps(analysis._jsonable(summary), indent=2, sort_keys=True))
        return EXIT_OK
    except ConfigError as exc:
        log(f"config error: {exc}")
        return EXIT_CONFIG
    except NumericalAbort as exc:
        where = f" (trajectory {exc.trajectory})" if exc.trajectory is not None else ""
        log(f"numerical abort{where}: {exc}")
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
