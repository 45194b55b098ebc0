"""
Monte Carlo campaign runner.

Each trial draws one scenario (channels and symbols) from a child seed of
the master seed. The same scenario is reused across the SNR grid, with an
independent noise stream per (trial, SNR). Every enabled receiver sees the
same noisy data.
"""

import csv
import hashlib
import io
import json
import math
import subprocess
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .bals import BalsConfig, bals_estimate, resolve_scaling
from .errors import ConfigError, EmptyMask, KakfError, ZeroTruth
from .receiver import SideInfo, kakf_run
from .scenario import SystemDims, build_design, gen_channels, gen_symbols
from .signal_model import add_noise, assemble_tall

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "RECEIVERS",
    "CSV_COLUMNS",
    "CampaignConfig",
    "TrialResult",
    "CampaignResult",
    "nmse",
    "ser",
    "run_trial",
    "run_campaign",
    "load_config",
    "config_from_dict",
]

RECEIVERS = ("kakf", "bals")
CSV_COLUMNS = (
    "snr_db",
    "receiver",
    "nmse_h_mean",
    "nmse_g_mean",
    "ser_mean",
    "runtime_mean_s",
    "runtime_median_s",
    "n_trials_ok",
    "n_trials_failed",
)
# flags that do not exclude a trial from the metric means
BENIGN_FLAGS = frozenset({"no_convergence"})

DIM_KEYS = ("m_bs", "n_irs", "n_users", "l_ut", "k_blocks", "t_slots", "i_frames", "l_h", "l_g")


def nmse(est, truth):
    """``||truth - est||_F^2 / ||truth||_F^2`` for one run."""
    est = np.asarray(est)
    truth = np.asarray(truth)
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch {est.shape} vs {truth.shape}")
    den = float(np.sum(np.abs(truth) ** 2))
    if den == 0.0:
        raise ZeroTruth("NMSE reference is all zeros")
    return float(np.sum(np.abs(truth - est) ** 2)) / den


def ser(detected, truth_symbols, anchor_mask):
    """Fraction of wrong symbols among entries where ``anchor_mask`` is True.

    ``anchor_mask`` selects the data symbols; known anchor symbols are False.
    """
    mask = np.asarray(anchor_mask, dtype=bool)
    n = int(mask.sum())
    if n == 0:
        raise EmptyMask("no data symbols to count")
    wrong = np.asarray(detected)[mask] != np.asarray(truth_symbols)[mask]
    return float(wrong.sum()) / n


@dataclass
class CampaignConfig:
    dims: SystemDims
    snr_grid_db: list
    n_trials: int = 200
    receivers: tuple = RECEIVERS
    master_seed: int = 0
    output_path: str = "results.csv"
    noiseless_mode: bool = False
    workers: int = 1
    timing: bool = True
    bals_max_iter: int = 1000
    bals_tol: float = 1e-6

    def __post_init__(self):
        self.snr_grid_db = [float(s) for s in self.snr_grid_db]
        if not self.snr_grid_db:
            raise ConfigError("snr_grid_db must not be empty")
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")
        if isinstance(self.receivers, str):
            self.receivers = tuple(r.strip() for r in self.receivers.split(",") if r.strip())
        self.receivers = tuple(self.receivers)
        unknown = set(self.receivers) - set(RECEIVERS)
        if unknown or not self.receivers:
            raise ConfigError(f"receivers must be a non-empty subset of {RECEIVERS}, got {self.receivers}")
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ConfigError("master_seed must fit in 64 unsigned bits")

    @property
    def effective_snr_grid(self):
        return [math.inf] if self.noiseless_mode else list(self.snr_grid_db)

    def to_dict(self):
        out = dict(self.dims.as_dict())
        for f in fields(self):
            if f.name != "dims":
                out[f.name] = getattr(self, f.name)
        out["receivers"] = list(self.receivers)
        return out


def config_from_dict(raw):
    raw = dict(raw)
    missing = [k for k in DIM_KEYS[:7] if k not in raw]
    if missing:
        raise ConfigError(f"missing dimension keys: {missing}")
    dims = SystemDims(**{k: raw.pop(k) for k in DIM_KEYS if k in raw})
    known = {f.name for f in fields(CampaignConfig)} - {"dims"}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    if "snr_grid_db" not in raw:
        raise ConfigError("missing key snr_grid_db")
    return CampaignConfig(dims=dims, **raw)


def load_config(path, **overrides):
    """Read a flat TOML config; ``None``-valued overrides are ignored."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(raw)


@dataclass
class TrialResult:
    snr_db: float
    receiver: str
    trial: int
    nmse_h: float = math.nan
    nmse_g: float = math.nan
    ser: float = math.nan
    wall_time_seconds: float = math.nan
    iterations: int = 0
    flags: tuple = ()
    data_checksum: str = ""

    @property
    def ok(self):
        return not (set(self.flags) - BENIGN_FLAGS)


def _seed(master, *key):
    return np.random.default_rng(np.random.SeedSequence(int(master), spawn_key=key))


def _checksum(y):
    return hashlib.sha256(np.ascontiguousarray(y).tobytes()).hexdigest()[:16]


def _run_kakf(rd, cd, ch, sf, dims):
    start = time.perf_counter()
    est = kakf_run(rd, cd, SideInfo(h_row1=ch.h[0], x_anchor=sf.anchor_row), dims)
    elapsed = time.perf_counter() - start
    flags = []
    if est.diagnostics["degenerate_columns"]:
        flags.append("degenerate_column")
    if est.diagnostics["skipped_columns"]:
        flags.append("anchor_too_small")
    return dict(
        nmse_h=nmse(est.h_hat, ch.h),
        nmse_g=nmse(est.g_hat, ch.g_mat),
        ser=ser(est.x_detected, sf.x, sf.data_mask()),
        wall_time_seconds=elapsed,
        flags=tuple(flags),
    )


def _run_bals(rd, cd, ch, sf, dims, cfg, rng):
    start = time.perf_counter()
    res = bals_estimate(rd, cd, sf.x, dims, cfg, rng=rng)
    elapsed = time.perf_counter() - start
    h_hat, g_frames = resolve_scaling(res.h_hat, res.g_frames_hat, ch.h[0])
    g_mat = np.stack([g.reshape(-1, order="F") for g in g_frames], axis=1)
    return dict(
        nmse_h=nmse(h_hat, ch.h),
        nmse_g=nmse(g_mat, ch.g_mat),
        wall_time_seconds=elapsed,
        iterations=res.iters,
        flags=() if res.converged else ("no_convergence",),
    )


def run_trial(cfg, trial):
    """All SNR points and receivers for one trial index."""
    dims = cfg.dims
    cd = build_design(dims)
    scen_rng = _seed(cfg.master_seed, 0, trial)
    ch = gen_channels(dims, scen_rng)
    sf = gen_symbols(dims, scen_rng)
    y = assemble_tall(ch, cd, sf)
    bals_cfg = BalsConfig(max_iter=cfg.bals_max_iter, tol=cfg.bals_tol)

    out = []
    for s_idx, snr in enumerate(cfg.effective_snr_grid):
        rd = add_noise(y, snr, _seed(cfg.master_seed, 1, trial, s_idx))
        digest = _checksum(rd.y_tall)
        for rx in cfg.receivers:
            res = TrialResult(snr_db=snr, receiver=rx, trial=trial, data_checksum=digest)
            try:
                if rx == "kakf":
                    vals = _run_kakf(rd, cd, ch, sf, dims)
                else:
                    vals = _run_bals(rd, cd, ch, sf, dims, bals_cfg, _seed(cfg.master_seed, 2, trial, s_idx))
            except KakfError as exc:
                res.flags = (f"error:{type(exc).__name__}",)
            else:
                for k, v in vals.items():
                    setattr(res, k, v)
            if not cfg.timing:
                res.wall_time_seconds = math.nan
            out.append(res)
    return out


def _mean(vals):
    vals = [v for v in vals if not math.isnan(v)]
    return float(np.mean(vals)) if vals else math.nan


def _median(vals):
    vals = [v for v in vals if not math.isnan(v)]
    return float(np.median(vals)) if vals else math.nan


@dataclass
class CampaignResult:
    config: CampaignConfig
    trials: list
    table: list = field(default_factory=list)

    def rows(self, receiver=None):
        return [r for r in self.table if receiver is None or r["receiver"] == receiver]

    def point(self, snr_db, receiver):
        for r in self.table:
            if r["receiver"] == receiver and r["snr_db"] == snr_db:
                return r
        raise KeyError((snr_db, receiver))


def aggregate(cfg, trials):
    table = []
    for snr in cfg.effective_snr_grid:
        for rx in cfg.receivers:
            group = [t for t in trials if t.snr_db == snr and t.receiver == rx]
            good = [t for t in group if t.ok]
            row = {
                "snr_db": snr,
                "receiver": rx,
                "nmse_h_mean": _mean([t.nmse_h for t in good]),
                "nmse_g_mean": _mean([t.nmse_g for t in good]),
                "ser_mean": _mean([t.ser for t in good]),
                "runtime_mean_s": _mean([t.wall_time_seconds for t in good]),
                "runtime_median_s": _median([t.wall_time_seconds for t in good]),
                "n_trials_ok": len(good),
                "n_trials_failed": len(group) - len(good),
                "iterations_mean": _mean([float(t.iterations) for t in good]) if rx == "bals" else math.nan,
                "n_no_convergence": sum("no_convergence" in t.flags for t in group),
            }
            table.append(row)
    return table


def run_campaign(cfg, write=True):
    """Run every (trial, SNR, receiver) job and aggregate per (SNR, receiver).

    With ``cfg.workers > 1`` trials are spread over a process pool; results
    are gathered in trial order, so the output is independent of scheduling.
    """
    trial_ids = range(cfg.n_trials)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            per_trial = list(pool.map(run_trial, [cfg] * cfg.n_trials, trial_ids))
    else:
        per_trial = [run_trial(cfg, t) for t in trial_ids]
    trials = [r for batch in per_trial for r in batch]
    result = CampaignResult(config=cfg, trials=trials, table=aggregate(cfg, trials))
    if write:
        write_outputs(result)
    return result


def _fmt(v):
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.10e}"
    return str(v)


def format_csv(table):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in table:
        writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def version_string():
    """``git describe`` output when run from a checkout, else the package version."""
    try:
        proc = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if proc.returncode == 0 and proc.stdout.strip():
            return f"{__version__}+g{proc.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _jsonable(v):
    if isinstance(v, float) and (math.isnan(v) or math.isinf(v)):
        return _fmt(v)
    return v


def summary_dict(result):
    cfg = result.config
    return {
        "version": version_string(),
        "config": {k: _jsonable(v) if not isinstance(v, list) else [_jsonable(x) for x in v]
                   for k, v in cfg.to_dict().items()},
        "derived": {"p": cfg.dims.p, "k_blocks": cfg.dims.k_blocks, "rate": cfg.dims.rate},
        "points": [{k: _jsonable(v) for k, v in row.items()} for row in result.table],
    }


def write_outputs(result):
    csv_path = Path(result.config.output_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(format_csv(result.table))
    json_path = csv_path.with_suffix(".json")
    json_path.write_text(json.dumps(summary_dict(result), indent=2) + "\n")
    return csv_path, json_path
