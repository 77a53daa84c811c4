"""Seeded SNR-by-method sweeps with CSV emission and aggregation.

A sweep samples the generative model once per (snr, seed) cell, runs every
requested estimator on the same observation, and records per-element
reconstruction error in dB against the true effective field. Closed-form
reference curves (ideal synchronization and per-block denoising) are emitted
as extra rows with seed -1.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .graph import build_triplet_tiling
from .model import (
    GridSpec,
    KernelSpec,
    build_row_covariance,
    apply_precoding,
    observe,
    sample_channel,
    sample_pose_set,
)
from .oracle import ideal_sync_mse_db, single_channel_mse_db
from .sync import DEFAULT_REFINEMENT_ITERS, METHODS, run_grid

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "SummaryRow",
    "ConfigError",
    "CSV_HEADER",
    "LINE_METHODS",
    "ALL_METHODS",
    "sigma_from_snr_db",
    "default_config",
    "parse_config_text",
    "load_config",
    "run_sweep",
    "emit_csv",
    "read_csv",
    "emit_summary",
]

LINE_METHODS = ("ideal_line", "single_channel_line")
ALL_METHODS = METHODS + LINE_METHODS

CSV_HEADER = "snr_db,method,seed,nmse_db,rel_improvement_db,wall_ms"

DEFAULT_SNR_DB = (-5.0, 0.0, 5.0, 10.0, 15.0, 20.0)


class ConfigError(ValueError):
    """Invalid experiment configuration or config file."""


def sigma_from_snr_db(snr_db: float) -> float:
    """Noise scale for a per-element SNR in dB under unit signal power."""
    return 10.0 ** (-snr_db / 20.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one sweep needs: problem geometry, noise grid, and methods."""

    grid: GridSpec
    kernel: KernelSpec
    snr_db_list: tuple = DEFAULT_SNR_DB
    seeds: int = 25
    methods: tuple = ALL_METHODS
    refinement_iters: int = DEFAULT_REFINEMENT_ITERS
    output_path: str | None = None

    def __post_init__(self):
        if self.seeds < 1:
            raise ConfigError("seeds must be >= 1")
        if not self.snr_db_list:
            raise ConfigError("snr_db_list must be non-empty")
        if not self.methods:
            raise ConfigError("methods must be non-empty")
        unknown = [m for m in self.methods if m not in ALL_METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; expected {ALL_METHODS}")
        if self.refinement_iters < 0:
            raise ConfigError("refinement_iters must be >= 0")
        object.__setattr__(self, "snr_db_list", tuple(float(s) for s in self.snr_db_list))
        object.__setattr__(self, "methods", tuple(self.methods))


def default_config(**overrides) -> ExperimentConfig:
    """The desk-scale default: 6x6 blocks of 3x4 cells, d = 2, length scale 5."""
    config = ExperimentConfig(
        grid=GridSpec(6, 6, 3, 4, 2),
        kernel=KernelSpec(length_scale=5.0),
    )
    return replace(config, **overrides) if overrides else config


@dataclass(frozen=True)
class ResultRow:
    """One (snr, method, seed) measurement; closed-form lines use seed -1."""

    snr_db: float
    method: str
    seed: int
    nmse_db: float
    rel_improvement_db: float
    wall_ms: float


@dataclass(frozen=True)
class SummaryRow:
    """Per-(snr, method) aggregate of nmse_db over seeds."""

    snr_db: float
    method: str
    mean_nmse_db: float
    se_nmse_db: float
    n: int
    single_seed: bool


def _parse_pair(text: str, sep: str, what: str) -> tuple:
    parts = text.lower().split(sep)
    if len(parts) != 2:
        raise ConfigError(f"{what} must look like '<a>{sep}<b>', got {text!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise ConfigError(f"{what} components must be integers: {text!r}") from exc


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse a plain-text 'key = value' config into an ExperimentConfig.

    Recognized keys: grid (HxW), block (RxC), antennas, lengthscale, jitter,
    snr_db (comma list), seeds, methods (comma list), refinement_iters, out.
    Unknown keys are rejected; omitted keys keep their defaults.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, _, val = line.partition("=")
        elif ":" in line:
            key, _, val = line.partition(":")
        else:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        values[key.strip().lower()] = val.strip()

    known = {
        "grid",
        "block",
        "antennas",
        "lengthscale",
        "jitter",
        "snr_db",
        "seeds",
        "methods",
        "refinement_iters",
        "out",
    }
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")

    base = default_config()
    height, width = (
        _parse_pair(values["grid"], "x", "grid")
        if "grid" in values
        else (base.grid.height_blocks, base.grid.width_blocks)
    )
    rows, cols = (
        _parse_pair(values["block"], "x", "block")
        if "block" in values
        else (base.grid.block_rows, base.grid.block_cols)
    )
    try:
        antennas = int(values.get("antennas", base.grid.antennas))
        lengthscale = float(values.get("lengthscale", base.kernel.length_scale))
        jitter = float(values.get("jitter", base.kernel.jitter))
        seeds = int(values.get("seeds", base.seeds))
        refinement_iters = int(values.get("refinement_iters", base.refinement_iters))
        snr_db = (
            tuple(float(s) for s in values["snr_db"].split(","))
            if "snr_db" in values
            else base.snr_db_list
        )
    except ValueError as exc:
        raise ConfigError(f"could not parse numeric config value: {exc}") from exc
    methods = (
        tuple(m.strip() for m in values["methods"].split(",") if m.strip())
        if "methods" in values
        else base.methods
    )

    try:
        grid = GridSpec(height, width, rows, cols, antennas)
        kernel = KernelSpec(length_scale=lengthscale, jitter=jitter)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(
        grid=grid,
        kernel=kernel,
        snr_db_list=snr_db,
        seeds=seeds,
        methods=methods,
        refinement_iters=refinement_iters,
        output_path=values.get("out", base.output_path),
    )


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text)


def run_sweep(config: ExperimentConfig) -> list:
    """Run the full (snr, seed, method) sweep and append closed-form lines.

    Seed s always uses its own fresh RNG stream, so a cell's data depends
    only on (grid, kernel, snr, seed). Estimator failures are recorded as
    NaN rows rather than aborting the sweep.
    """
    cov = build_row_covariance(config.grid, config.kernel)
    tiling = build_triplet_tiling(config.grid)
    d_cells = config.grid.block_cells
    cov_block = cov.matrix[:d_cells, :d_cells]
    estimators = [m for m in config.methods if m in METHODS]

    rows = []
    for snr_db in config.snr_db_list:
        sigma = sigma_from_snr_db(snr_db)
        single_db = single_channel_mse_db(cov_block, sigma)
        for seed in range(config.seeds):
            rng = np.random.default_rng(seed)
            channels = sample_channel(cov, config.grid.antennas, rng)
            poses = sample_pose_set(config.grid.n_blocks, config.grid.antennas, rng)
            effective = apply_precoding(channels, poses)
            obs = observe(effective, sigma, rng)
            for method in estimators:
                start = time.perf_counter()
                try:
                    report = run_grid(
                        method,
                        obs,
                        cov,
                        config.grid,
                        tiling,
                        ground_truth=effective,
                        refinement_iters=config.refinement_iters,
                    )
                    nmse_db = report.nmse_db
                except Exception:
                    nmse_db = math.nan
                wall_ms = (time.perf_counter() - start) * 1e3
                rows.append(
                    ResultRow(
                        snr_db=snr_db,
                        method=method,
                        seed=seed,
                        nmse_db=nmse_db,
                        rel_improvement_db=nmse_db - single_db,
                        wall_ms=wall_ms,
                    )
                )
        if "ideal_line" in config.methods:
            ideal_db = ideal_sync_mse_db(cov, sigma)
            rows.append(
                ResultRow(snr_db, "ideal_line", -1, ideal_db, ideal_db - single_db, 0.0)
            )
        if "single_channel_line" in config.methods:
            rows.append(
                ResultRow(snr_db, "single_channel_line", -1, single_db, 0.0, 0.0)
            )
    return rows


def _format_value(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def emit_csv(rows, path: str) -> None:
    """Write rows sorted by (snr_db, method, seed) with 6-significant-digit floats."""
    ordered = sorted(rows, key=lambda r: (r.snr_db, r.method, r.seed))
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(CSV_HEADER + "\n")
            for r in ordered:
                fh.write(
                    ",".join(
                        (
                            _format_value(r.snr_db),
                            r.method,
                            str(r.seed),
                            _format_value(r.nmse_db),
                            _format_value(r.rel_improvement_db),
                            _format_value(r.wall_ms),
                        )
                    )
                    + "\n"
                )
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def read_csv(path: str) -> list:
    """Parse a CSV produced by emit_csv back into ResultRow values."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise OSError(f"cannot read CSV from {path}: {exc}") from exc
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"unexpected CSV header in {path}")
    rows = []
    for line in lines[1:]:
        if not line:
            continue
        snr, method, seed, nmse, rel, wall = line.split(",")
        rows.append(
            ResultRow(
                snr_db=float(snr),
                method=method,
                seed=int(seed),
                nmse_db=float(nmse),
                rel_improvement_db=float(rel),
                wall_ms=float(wall),
            )
        )
    return rows


def emit_summary(rows) -> list:
    """Aggregate nmse_db per (snr, method): mean, standard error, and count.

    Standard error is the sample standard deviation over seeds divided by
    sqrt(n); single-row groups report SE 0 and are flagged.
    """
    groups = {}
    for r in rows:
        groups.setdefault((r.snr_db, r.method), []).append(r.nmse_db)
    out = []
    for (snr_db, method), values in sorted(groups.items()):
        arr = np.asarray(values, dtype=float)
        n = len(arr)
        se = float(np.std(arr, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        out.append(
            SummaryRow(
                snr_db=snr_db,
                method=method,
                mean_nmse_db=float(arr.mean()),
                se_nmse_db=se,
                n=n,
                single_seed=n == 1,
            )
        )
    return out
