"""Experiment orchestration: preset states, Monte Carlo trials, reports.

The three preset states are simple mixtures tuned by one-dimensional root
finding to reproduce published (entropy, entanglement) pairs: a very noisy
mixed state (VNMS, rank 4), a highly entangled state (HES, rank 2), and an
almost pure separable state (APSS, rank 2).  ``run_experiment`` replays the
sampling-and-estimation protocol over a grid of acquisition times with a
configurable trial count and writes one CSV row per (time, strategy),
including the matching error bound evaluated in the true-rank model.

Trials are embarrassingly parallel; results are merged by trial index, so
reports are byte-identical for any worker count.  ``TOMO_THREADS`` caps the
workers (0 or unset means auto).
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from ._rng import derive_seed
from .errors import ContractError, TomographyError, TrialFailureError
from .estimate import FitOptions, fit_options_with_seed, maice_fit, mle_fit
from .infogeo import cr_bound_bures
from .measure import ProjectorSet, default_projectors, sample_counts
from .param import project_to_rank, to_state
from .qstate import (
    DensityMatrix,
    StateCharacter,
    binary_entropy,
    characterize,
    fidelity,
    von_neumann_entropy,
)

PRESET_NAMES = ("APSS", "HES", "VNMS")
STRATEGIES = ("MLE_rank4", "MAICE")
_STRATEGY_IDS = {"MLE_rank4": 0, "MAICE": 1}

_SEED_SCHEME = (
    "per-trial seed = splitmix64 chain over (master_seed, t_index, strategy_id, "
    "trial_index); strategy ids: MLE_rank4=0, MAICE=1"
)

# Basis order (HH, HV, VH, VV).
_PHI_PLUS = np.array([1.0, 0.0, 0.0, 1.0], dtype=np.complex128) / np.sqrt(2.0)
_PSI_MINUS = np.array([0.0, 1.0, -1.0, 0.0], dtype=np.complex128) / np.sqrt(2.0)

_VNMS_ENTROPY = 1.995
_HES_ENTROPY = 0.456
_APSS_ENTROPY = 0.212
_APSS_EOF = 0.032


@dataclass(frozen=True)
class PresetState:
    name: str
    rho: DensityMatrix
    k_true: int
    character: StateCharacter

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "k_true": self.k_true,
            "character": {
                "entropy_bits": self.character.entropy_bits,
                "eof_bits": self.character.eof_bits,
                "concurrence": self.character.concurrence,
                "rank": self.character.rank,
            },
            "rho": self.rho.to_json(),
        }


def _pure(ket: np.ndarray) -> np.ndarray:
    return np.outer(ket, ket.conj())


def _werner(p: float) -> np.ndarray:
    return p * _pure(_PHI_PLUS) + (1.0 - p) * np.eye(4) / 4.0


@lru_cache(maxsize=None)
def _vnms_weight() -> float:
    return brentq(lambda p: von_neumann_entropy(_werner(p)) - _VNMS_ENTROPY, 1e-9, 1.0 / 3.0)


@lru_cache(maxsize=None)
def _hes_weight() -> float:
    return brentq(lambda q: binary_entropy(q) - _HES_ENTROPY, 1e-9, 0.5)


def _apss_matrix(q: float, eta: float) -> np.ndarray:
    ket = np.array([0.0, np.cos(eta), np.sin(eta), 0.0], dtype=np.complex128)
    ket_perp = np.array([0.0, np.sin(eta), -np.cos(eta), 0.0], dtype=np.complex128)
    return (1.0 - q) * _pure(ket) + q * _pure(ket_perp)


@lru_cache(maxsize=None)
def _apss_weights() -> tuple[float, float]:
    q = brentq(lambda x: binary_entropy(x) - _APSS_ENTROPY, 1e-9, 0.5)

    def eof_gap(eta):
        return characterize(_apss_matrix(q, eta)).eof_bits - _APSS_EOF

    eta = brentq(eof_gap, 1e-6, np.pi / 4.0)
    return q, eta


def make_preset(name: str) -> PresetState:
    """One of the three named true states, rebuilt deterministically."""
    key = name.upper()
    if key == "VNMS":
        rho = DensityMatrix(_werner(_vnms_weight()))
        k_true = 4
    elif key == "HES":
        q = _hes_weight()
        rho = DensityMatrix((1.0 - q) * _pure(_PHI_PLUS) + q * _pure(_PSI_MINUS))
        k_true = 2
    elif key == "APSS":
        q, eta = _apss_weights()
        rho = DensityMatrix(_apss_matrix(q, eta))
        k_true = 2
    else:
        raise ContractError(f"unknown preset {name!r}; choices: {PRESET_NAMES}")
    return PresetState(key, rho, k_true, characterize(rho))


@dataclass(frozen=True)
class ExperimentConfig:
    """Inputs for one Monte Carlo error-scaling run."""

    preset: str | None = None
    rho: DensityMatrix | None = None
    C: float = 500.0
    t_grid: tuple[float, ...] = (0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0)
    r: int = 200
    master_seed: int = 0
    strategies: tuple[str, ...] = STRATEGIES
    projector_file: str | None = None

    def __post_init__(self):
        if (self.preset is None) == (self.rho is None):
            raise ContractError("exactly one of preset or rho must be given")
        if self.r < 2:
            raise ContractError("r must be >= 2")
        if not self.C > 0.0:
            raise ContractError("C must be positive")
        if not self.t_grid or any(t <= 0.0 for t in self.t_grid):
            raise ContractError("all acquisition times must be positive")
        object.__setattr__(self, "t_grid", tuple(float(t) for t in self.t_grid))
        strategies = tuple(self.strategies)
        if not strategies or any(s not in STRATEGIES for s in strategies):
            raise ContractError(f"strategies must be a nonempty subset of {STRATEGIES}")
        object.__setattr__(self, "strategies", strategies)

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        known = {"preset", "rho", "C", "t_grid", "r", "master_seed", "strategies",
                 "projector_file"}
        unknown = set(obj) - known
        if unknown:
            raise ContractError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(obj)
        if kwargs.get("rho") is not None:
            kwargs["rho"] = DensityMatrix.from_json(kwargs["rho"])
        if "t_grid" in kwargs:
            kwargs["t_grid"] = tuple(kwargs["t_grid"])
        if "strategies" in kwargs:
            kwargs["strategies"] = tuple(kwargs["strategies"])
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class ReportRow:
    state: str
    ct: float
    strategy: str
    mean_half_bures: float
    std_half_bures: float
    cr_bound_half: float
    rank_hist: tuple[int, int, int, int]


@dataclass(frozen=True)
class ExperimentReport:
    rows: tuple[ReportRow, ...]
    master_seed: int | None = None


def run_trial(rho_true, C: float, t: float, strategy: str, seed: int,
              ps: ProjectorSet, opts: FitOptions | None = None):
    """Sample one count record and estimate it; returns (rho_hat, k, 1 - F)."""
    if strategy not in STRATEGIES:
        raise ContractError(f"unknown strategy {strategy!r}")
    rec = sample_counts(rho_true, C, t, ps, derive_seed(seed, 0))
    fit_opts = fit_options_with_seed(opts, derive_seed(seed, 1))
    if strategy == "MLE_rank4":
        fit = mle_fit(rec, ps, 4, fit_opts)
        selected_k = 4
        rho_hat, _ = to_state(fit.theta_hat)
    else:
        result = maice_fit(rec, ps, fit_opts)
        selected_k = result.selected_k
        rho_hat = result.rho_hat
    half_bures = 1.0 - fidelity(rho_true, rho_hat)
    return rho_hat, selected_k, half_bures


def _trial_task(args):
    rho_true, C, t, strategy, seed, ps = args
    try:
        _, selected_k, half = run_trial(rho_true, C, t, strategy, seed, ps)
    except TomographyError as exc:
        raise TrialFailureError(f"trial with seed {seed} failed: {exc}") from exc
    return selected_k, half


def resolve_workers() -> int:
    """Worker count from TOMO_THREADS; 0 or unset means one per CPU."""
    raw = os.environ.get("TOMO_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ContractError(f"TOMO_THREADS={raw!r} is not an integer")
    if n < 0:
        raise ContractError("TOMO_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Monte Carlo error scaling over the configured time grid.

    Per-trial seeds derive from (master_seed, t_index, strategy_id,
    trial_index), so the report is a pure function of the config.
    """
    ps = ProjectorSet.load(cfg.projector_file) if cfg.projector_file else default_projectors()
    if cfg.preset is not None:
        preset = make_preset(cfg.preset)
        rho_true, k_true, state_name = preset.rho, preset.k_true, preset.name
    else:
        rho_true = cfg.rho
        k_true = characterize(rho_true).rank
        state_name = "custom"
    p0 = project_to_rank(rho_true, k_true)

    tasks = []
    for t_idx, t in enumerate(cfg.t_grid):
        for strategy in cfg.strategies:
            s_id = _STRATEGY_IDS[strategy]
            for trial in range(cfg.r):
                seed = derive_seed(cfg.master_seed, t_idx, s_id, trial)
                tasks.append((rho_true, cfg.C, t, strategy, seed, ps))

    workers = resolve_workers()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_trial_task, tasks, chunksize=1))
    else:
        results = [_trial_task(task) for task in tasks]

    rows = []
    pos = 0
    for t in cfg.t_grid:
        ct = cfg.C * t
        bound_half = cr_bound_bures(p0, ps, ct) / 2.0
        for strategy in cfg.strategies:
            chunk = results[pos : pos + cfg.r]
            pos += cfg.r
            halves = np.array([h for _, h in chunk])
            hist = [0, 0, 0, 0]
            for k_sel, _ in chunk:
                hist[k_sel - 1] += 1
            rows.append(
                ReportRow(
                    state=state_name,
                    ct=ct,
                    strategy=strategy,
                    mean_half_bures=float(halves.mean()),
                    std_half_bures=float(halves.std(ddof=1)),
                    cr_bound_half=bound_half,
                    rank_hist=tuple(hist),
                )
            )
    return ExperimentReport(rows=tuple(rows), master_seed=cfg.master_seed)


_CSV_HEADER = [
    "state", "Ct", "strategy", "mean_half_bures", "std_half_bures",
    "cr_bound_half", "rank1", "rank2", "rank3", "rank4",
]


def emit_report(report: ExperimentReport, path) -> None:
    """Report CSV with full-precision floats and the seed scheme on top."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# seed-scheme: {_SEED_SCHEME}\n")
        if report.master_seed is not None:
            fh.write(f"# master-seed: {report.master_seed}\n")
        writer = csv.writer(fh)
        writer.writerow(_CSV_HEADER)
        for row in report.rows:
            writer.writerow(
                [
                    row.state,
                    f"{row.ct:.17e}",
                    row.strategy,
                    f"{row.mean_half_bures:.17e}",
                    f"{row.std_half_bures:.17e}",
                    f"{row.cr_bound_half:.17e}",
                    *row.rank_hist,
                ]
            )


def read_report(path) -> ExperimentReport:
    """Read back a report CSV written by ``emit_report``."""
    master_seed = None
    rows = []
    with open(path, newline="") as fh:
        lines = []
        for line in fh:
            if line.startswith("#"):
                if line.startswith("# master-seed:"):
                    master_seed = int(line.split(":", 1)[1])
                continue
            lines.append(line)
        reader = csv.reader(lines)
        header = next(reader, None)
        if header != _CSV_HEADER:
            raise ContractError(f"unexpected report header: {header}")
        for rec in reader:
            if not rec:
                continue
            rows.append(
                ReportRow(
                    state=rec[0],
                    ct=float(rec[1]),
                    strategy=rec[2],
                    mean_half_bures=float(rec[3]),
                    std_half_bures=float(rec[4]),
                    cr_bound_half=float(rec[5]),
                    rank_hist=tuple(int(x) for x in rec[6:10]),
                )
            )
    return ExperimentReport(rows=tuple(rows), master_seed=master_seed)
