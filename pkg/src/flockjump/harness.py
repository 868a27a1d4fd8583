"""Experiment harness: JSON configs, seeded reproducible scenario runs
(including the built-in wave presets), and the output bundle.

A run bundle directory contains `config.snapshot` (canonical JSON),
`summary.json`, `hist_timeavg.csv`, `hist_snapshot.csv`, `mean_path.csv`, and
optionally `events.csv`. Every float serializes as shortest-round-trip decimal
(17 significant digits), so (config, seed) determines every output byte.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, asdict, field

import numpy as np

from . import measures, mean_field, sim
from .model import (
    ArccotRate,
    DeterministicJump,
    ExponentialJump,
    ExponentialRate,
    ModelError,
    PiecewiseLinearRate,
    StepRate,
    TabulatedRate,
)


class ConfigError(ModelError):
    """Bad or missing configuration key (the message names the key)."""


class FitError(ModelError):
    """Degenerate speed-fit window."""


# ---------------------------------------------------------------------------
# rate / jump-length spec serialization
# ---------------------------------------------------------------------------

_RATE_FAMILIES = {
    "exponential": ExponentialRate,
    "step": StepRate,
    "piecewise_linear": PiecewiseLinearRate,
    "arccot": ArccotRate,
    "tabulated": TabulatedRate,
}


def rate_spec_from_dict(d: dict):
    if not isinstance(d, dict) or "family" not in d:
        raise ConfigError("rate: needs a 'family' key")
    fam = d["family"]
    if fam == "exponential":
        return ExponentialRate(beta=float(d.get("beta", 1.0)))
    if fam == "step":
        return StepRate(a=float(d["a"]), b=float(d["b"]))
    if fam == "piecewise_linear":
        return PiecewiseLinearRate(a=float(d["a"]), b=float(d["b"]))
    if fam == "arccot":
        return ArccotRate()
    if fam == "tabulated":
        return TabulatedRate(grid=tuple(d["grid"]), values=tuple(d["values"]))
    raise ConfigError(f"rate.family: unknown family {fam!r}")


def rate_spec_to_dict(w) -> dict:
    if isinstance(w, ExponentialRate):
        return {"family": "exponential", "beta": w.beta}
    if isinstance(w, StepRate):
        return {"family": "step", "a": w.a, "b": w.b}
    if isinstance(w, PiecewiseLinearRate):
        return {"family": "piecewise_linear", "a": w.a, "b": w.b}
    if isinstance(w, ArccotRate):
        return {"family": "arccot"}
    if isinstance(w, TabulatedRate):
        return {"family": "tabulated", "grid": list(w.grid), "values": list(w.values)}
    raise ConfigError(f"rate: cannot serialize {type(w).__name__}")


def length_spec_from_dict(d: dict):
    fam = d.get("family", "exponential")
    if fam == "exponential":
        return ExponentialJump()
    if fam == "deterministic":
        return DeterministicJump()
    raise ConfigError(f"length.family: unknown family {fam!r} "
                      "(custom densities are constructed in code, not from config)")


def length_spec_to_dict(z) -> dict:
    if isinstance(z, ExponentialJump):
        return {"family": "exponential"}
    if isinstance(z, DeterministicJump):
        return {"family": "deterministic"}
    raise ConfigError(f"length: cannot serialize {type(z).__name__}")


def parse_rate_string(text: str):
    """CLI shorthand, e.g. 'step:a=2,b=1', 'exponential:beta=1', 'arccot'."""
    fam, _, rest = text.partition(":")
    d = {"family": fam.strip()}
    if rest:
        for part in rest.split(","):
            key, _, val = part.partition("=")
            if not val:
                raise ConfigError(f"rate string: malformed parameter {part!r}")
            d[key.strip()] = float(val)
    return rate_spec_from_dict(d)


# ---------------------------------------------------------------------------
# experiment configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    scenario: str
    n: int
    rate: dict
    length: dict = field(default_factory=lambda: {"family": "exponential"})
    T: float = 100.0
    seed: int = 1
    observations: int = 1000
    window: tuple = (-10.0, 10.0)
    bins: int = None
    initial: dict = field(default_factory=lambda: {"kind": "zeros"})
    snapshot_time: float = None
    burn_in: float = 0.0
    fit_window: float = 0.5
    engine: str = "auto"
    log_events: bool = False
    outdir: str = None

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ConfigError(f"n: must be an integer >= 1, got {self.n!r}")
        if self.T < 0:
            raise ConfigError(f"T: must be >= 0, got {self.T}")
        self.window = tuple(float(x) for x in self.window)
        if len(self.window) != 2 or not self.window[0] < self.window[1]:
            raise ConfigError(f"histogram.window: needs a0 < a1, got {self.window}")
        if self.bins is not None and self.bins < 1:
            raise ConfigError(f"histogram.bins: must be >= 1, got {self.bins}")
        if self.observations < 1:
            raise ConfigError(f"observations: must be >= 1, got {self.observations}")
        if not 0.0 < self.fit_window <= 1.0:
            raise ConfigError(f"fit_window: must be in (0, 1], got {self.fit_window}")
        rate_spec_from_dict(self.rate)
        length_spec_from_dict(self.length)
        kind = self.initial.get("kind", "zeros")
        if kind not in ("zeros", "explicit", "iid_uniform", "iid_normal"):
            raise ConfigError(f"initial.kind: unknown kind {kind!r}")
        if kind == "explicit" and len(self.initial.get("positions", [])) != self.n:
            raise ConfigError("initial.positions: must list exactly n positions")

    @property
    def nbins(self) -> int:
        return self.bins if self.bins is not None else measures.default_bins(self.n)

    def build_rate(self):
        return rate_spec_from_dict(self.rate)

    def build_length(self):
        return length_spec_from_dict(self.length)

    def build_initial(self):
        kind = self.initial.get("kind", "zeros")
        if kind == "zeros":
            return "zeros"
        if kind == "explicit":
            return np.asarray(self.initial["positions"], dtype=float)
        if kind == "iid_uniform":
            lo, hi = float(self.initial["lo"]), float(self.initial["hi"])
            return ("iid", lambda rng, n: rng.uniform(lo, hi, n))
        if kind == "iid_normal":
            mu, sd = float(self.initial.get("mean", 0.0)), float(self.initial.get("sd", 1.0))
            return ("iid", lambda rng, n: rng.normal(mu, sd, n))
        raise ConfigError(f"initial.kind: unknown kind {kind!r}")


def config_to_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["window"] = list(cfg.window)
    return d


def config_from_dict(d: dict) -> ExperimentConfig:
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    extra = set(d) - known
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    missing = {"scenario", "n", "rate"} - set(d)
    if missing:
        raise ConfigError(f"missing required config keys: {sorted(missing)}")
    d = dict(d)
    if "window" in d:
        d["window"] = tuple(d["window"])
    return ExperimentConfig(**d)


def canonical_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file does not parse as JSON: {exc}") from exc
    return config_from_dict(raw)


def save_config(cfg: ExperimentConfig, path):
    with open(path, "w") as fh:
        fh.write(canonical_json(config_to_dict(cfg)))


# ---------------------------------------------------------------------------
# presets (large reference runs and desk-scale versions)
# ---------------------------------------------------------------------------

PRESETS = {
    "fig4_6": dict(scenario="fig4_6", n=10_000, rate={"family": "exponential", "beta": 1.0},
                   length={"family": "exponential"}, T=1000.0, seed=46, window=(-10.0, 10.0)),
    "fig7_9": dict(scenario="fig7_9", n=10_000, rate={"family": "step", "a": 2.0, "b": 1.0},
                   length={"family": "exponential"}, T=1000.0, seed=79, window=(-10.0, 10.0)),
    "fig4_6_small": dict(scenario="fig4_6_small", n=1000,
                         rate={"family": "exponential", "beta": 1.0},
                         length={"family": "exponential"}, T=200.0, seed=146, window=(-10.0, 10.0)),
    "fig7_9_small": dict(scenario="fig7_9_small", n=1000,
                         rate={"family": "step", "a": 2.0, "b": 1.0},
                         length={"family": "exponential"}, T=200.0, seed=179, window=(-10.0, 10.0)),
}


def preset_config(name: str, **overrides) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; have {sorted(PRESETS)}")
    d = dict(PRESETS[name])
    d.update(overrides)
    return config_from_dict(d)


# ---------------------------------------------------------------------------
# speed fit and histogram distances
# ---------------------------------------------------------------------------


def fit_speed(times, means, window_fraction: float = 0.5):
    """OLS slope and standard error of the mean path over the trailing window."""
    times = np.asarray(times, dtype=float)
    means = np.asarray(means, dtype=float)
    start = int(math.floor(len(times) * (1.0 - window_fraction)))
    t = times[start:]
    y = means[start:]
    if len(t) < 10:
        raise FitError(f"speed fit needs >= 10 samples in the window, got {len(t)}")
    tc = t - t.mean()
    denom = float(np.dot(tc, tc))
    if denom == 0.0:
        raise FitError("speed fit window has zero time spread")
    slope = float(np.dot(tc, y)) / denom
    resid = y - y.mean() - slope * tc
    dof = max(len(t) - 2, 1)
    stderr = math.sqrt(float(np.dot(resid, resid)) / dof / denom)
    return slope, stderr


def ks_histogram_vs_cdf(hist: measures.Histogram, cdf) -> float:
    """KS distance between the sample law underlying a histogram and a model CDF,
    evaluated at the bin edges (the finest resolution the histogram retains)."""
    edges = hist.edges
    emp = hist.cdf_at_edges()
    model = np.asarray(cdf(edges), dtype=float)
    return float(np.max(np.abs(emp - model)))


def w1_histogram_vs_cdf(hist: measures.Histogram, cdf) -> float:
    """W1 restricted to the histogram window (CDF-difference integral)."""
    edges = hist.edges
    emp = hist.cdf_at_edges()
    model = np.asarray(cdf(edges), dtype=float)
    return float(np.trapezoid(np.abs(emp - model), edges))


# ---------------------------------------------------------------------------
# scenario runner
# ---------------------------------------------------------------------------


@dataclass
class ScenarioResult:
    config: ExperimentConfig
    summary: dict
    hist_timeavg: measures.Histogram
    hist_snapshot: measures.Histogram
    mean_times: np.ndarray
    mean_path: np.ndarray
    sim_result: sim.SimulationResult


def run_scenario(cfg: ExperimentConfig, outdir=None) -> ScenarioResult:
    """Execute one configured run and compute the standard diagnostics:
    time-averaged centered histogram, one snapshot histogram, the mean path
    with its trailing-window speed fit, and KS/W1 distances to the matching
    mean-field stationary density."""
    if outdir is None:
        outdir = cfg.outdir
    w = cfg.build_rate()
    z = cfg.build_length()
    rng = np.random.default_rng(cfg.seed)
    a0, a1 = cfg.window
    nbins = cfg.nbins
    snapshot_time = cfg.snapshot_time if cfg.snapshot_time is not None else 0.5 * cfg.T

    averager = measures.TimeAverager(burn_in=cfg.burn_in)
    mean_times, mean_path = [], []
    snapshot = {"hist": None, "err": math.inf, "t": None}

    def observer(t, positions, m):
        hist = measures.build_histogram(positions, m, a0, a1, nbins)
        averager.add(t, hist)
        mean_times.append(t)
        mean_path.append(m)
        if abs(t - snapshot_time) < snapshot["err"]:
            snapshot["hist"] = hist
            snapshot["err"] = abs(t - snapshot_time)
            snapshot["t"] = t

    result = sim.simulate(w, z, cfg.n, T=cfg.T, rng=rng, init=cfg.build_initial(),
                          observer=observer, observations=cfg.observations,
                          engine=cfg.engine, log_events=cfg.log_events)

    wave = mean_field.stationary_wave(w)
    hist_avg = averager.finalize()
    slope, stderr = fit_speed(mean_times, mean_path, cfg.fit_window)

    summary = {
        "scenario": cfg.scenario,
        "n": cfg.n,
        "seed": cfg.seed,
        "rng": "numpy PCG64 (default_rng)",
        "engine": result.engine,
        "events": result.events,
        "final_time": result.final_time,
        "truncated": result.truncated,
        "initial_center": result.initial_center,
        "final_center": result.final_center,
        "wave_label": wave.label,
        "wave_speed_model": wave.c,
        "fitted_speed": slope,
        "fitted_speed_stderr": stderr,
        "speed_rel_err": abs(slope - wave.c) / wave.c,
        "ks_timeavg": ks_histogram_vs_cdf(hist_avg, wave.cdf),
        "w1_timeavg": w1_histogram_vs_cdf(hist_avg, wave.cdf),
        "ks_snapshot": ks_histogram_vs_cdf(snapshot["hist"], wave.cdf),
        "snapshot_time": snapshot["t"],
        "out_of_window_fraction_timeavg": hist_avg.out_count / hist_avg.n_samples,
    }

    out = ScenarioResult(config=cfg, summary=summary, hist_timeavg=hist_avg,
                         hist_snapshot=snapshot["hist"],
                         mean_times=np.asarray(mean_times), mean_path=np.asarray(mean_path),
                         sim_result=result)
    if outdir is not None:
        write_bundle(out, outdir)
    return out


def write_bundle(res: ScenarioResult, outdir):
    os.makedirs(outdir, exist_ok=True)
    save_config(res.config, os.path.join(outdir, "config.snapshot"))
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        fh.write(canonical_json(_jsonable(res.summary)))
    res.hist_timeavg.write_csv(os.path.join(outdir, "hist_timeavg.csv"))
    res.hist_snapshot.write_csv(os.path.join(outdir, "hist_snapshot.csv"))
    with open(os.path.join(outdir, "mean_path.csv"), "w") as fh:
        fh.write("t,mean\n")
        for t, m in zip(res.mean_times, res.mean_path):
            fh.write(f"{t:.17g},{m:.17g}\n")
    if res.sim_result.log is not None:
        res.sim_result.log.write_csv(os.path.join(outdir, "events.csv"))


def _jsonable(d: dict) -> dict:
    out = {}
    for key, val in d.items():
        if isinstance(val, (np.floating, np.integer)):
            val = val.item()
        out[key] = val
    return out


def write_profile_csv(profile: mean_field.WaveProfile, path):
    with open(path, "w") as fh:
        fh.write("x,density\n")
        for x, v in zip(profile.grid, profile.values):
            fh.write(f"{x:.17g},{v:.17g}\n")


def write_pde_diagnostics_csv(diags: mean_field.PdeDiagnostics, path):
    has_w1 = diags.w1_shape is not None
    with open(path, "w") as fh:
        fh.write("t,mass,mean,speed,w1\n" if has_w1 else "t,mass,mean,speed\n")
        for i in range(len(diags.t)):
            row = [diags.t[i], diags.mass[i], diags.mean[i], diags.speed[i]]
            if has_w1:
                row.append(diags.w1_shape[i])
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
