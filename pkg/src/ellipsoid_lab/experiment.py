"""Reproducible Monte Carlo sweeps of the (d, m) fitting phase diagram.

Each trial is one Bernoulli observation: draw m Gaussian points in
dimension d, run the selected construction, record its certificate.  The
trial's seed is derived as mix64(master_seed, d, m, trial_index), so any
cell, any trial, and any prefix of the work can be recomputed in isolation
and results never depend on scheduling.  Aggregation sorts records by
(d, m, trial_index) before anything is written; two runs of the same
config are byte-identical regardless of worker count.

Wall-clock timing is off by default for exactly that reason: records carry
wall_time = 0.0 unless timings are requested, keeping output files stable.
"""

from __future__ import annotations

import concurrent.futures
import csv
import json
import math
import os
import time
from dataclasses import dataclass, field

from .construct import PD_TOL, RESIDUAL_TOL, identity_perturbation_fit, least_norm_fit
from .gram import build_A
from .numerics import operator_norm
from .sampling import draw_sample_set
from .seeding import mix64

__all__ = [
    "METHODS",
    "WILSON_Z95",
    "ExperimentConfig",
    "TrialRecord",
    "PhaseCell",
    "PhaseTable",
    "wilson_interval",
    "derived_seed",
    "run_trial",
    "resolve_workers",
    "run_phase_sweep",
    "estimate_transition",
    "records_to_csv",
    "records_from_csv",
    "summary_to_csv",
    "summary_from_csv",
    "records_to_json",
    "records_from_json",
    "summary_to_json",
    "summary_from_json",
]

METHODS = ("identity_perturbation", "least_norm")
WILSON_Z95 = 1.959963984540054
DEFAULT_FRACTIONS = (0.1, 0.5, 1.0, 1.5, 2.0)

RECORD_COLUMNS = ("d", "m", "trial", "seed", "success", "n_min_eig", "k_norm",
                  "max_residual", "a_norm", "m_min_eig", "wall_ms")
SUMMARY_COLUMNS = ("d", "m", "trials", "successes", "rate", "wilson_lo", "wilson_hi")

WORKERS_ENV_VAR = "ELLIPSOID_LAB_THREADS"


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: a (d, m) grid, trial count, method, and seeding root.

    m cells come either from an explicit m_values list (used for every d)
    or from m_fractions of d^2/4, rounded to the nearest integer with a
    floor of 1.  Giving both is ambiguous and rejected; giving neither
    selects fractions (0.1, 0.5, 1.0, 1.5, 2.0).  workers=0 means one
    worker per CPU; the ELLIPSOID_LAB_THREADS environment variable, when
    set, overrides workers entirely.
    """

    d_values: tuple[int, ...]
    m_values: tuple[int, ...] | None = None
    m_fractions: tuple[float, ...] | None = None
    trials: int = 100
    master_seed: int = 0
    method: str = "identity_perturbation"
    residual_tol: float = RESIDUAL_TOL
    pd_tol: float = PD_TOL
    n_u: int = 100
    workers: int = 1
    timings: bool = False
    out_dir: str = "."
    prefix: str = "phase"
    output_format: str = "csv"

    def __post_init__(self):
        object.__setattr__(self, "d_values", tuple(int(d) for d in self.d_values))
        if self.m_values is not None:
            object.__setattr__(self, "m_values", tuple(int(m) for m in self.m_values))
        if self.m_fractions is not None:
            object.__setattr__(self, "m_fractions", tuple(float(f) for f in self.m_fractions))
        if not self.d_values:
            raise ValueError("d_values must be nonempty")
        if any(d < 2 for d in self.d_values):
            raise ValueError("every d must be at least 2")
        if self.m_values is not None and self.m_fractions is not None:
            raise ValueError("give m_values or m_fractions, not both")
        if self.m_values is not None:
            if not self.m_values or any(m < 1 for m in self.m_values):
                raise ValueError("m_values must be nonempty positive integers")
        if self.m_fractions is not None:
            if not self.m_fractions or any(not 0.0 < f <= 4.0 for f in self.m_fractions):
                raise ValueError("m_fractions must lie in (0, 4]")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.workers < 0:
            raise ValueError("workers must be nonnegative (0 = one per CPU)")
        if self.n_u < 0:
            raise ValueError("n_u must be nonnegative")
        if self.output_format not in ("csv", "json"):
            raise ValueError("output_format must be csv or json")

    def m_cells(self, d: int) -> tuple[int, ...]:
        """The m values swept at this d, ascending and deduplicated."""
        if self.m_values is not None:
            return tuple(sorted(set(self.m_values)))
        fractions = self.m_fractions if self.m_fractions is not None else DEFAULT_FRACTIONS
        return tuple(sorted({max(1, round(f * d * d / 4.0)) for f in fractions}))


@dataclass(frozen=True)
class TrialRecord:
    """One Bernoulli observation with its certificates.

    derived_seed = mix64(master_seed, d, m, trial_index) by contract.
    wall_time is in milliseconds and 0.0 unless timings were enabled.
    reason is diagnostic only (not serialized, excluded from equality).
    """

    d: int
    m: int
    trial_index: int
    derived_seed: int
    success: bool
    N_min_eig: float
    K_norm: float
    max_residual: float
    a_norm: float
    M_min_eig: float
    wall_time: float
    reason: str = field(default="ok", compare=False)


@dataclass(frozen=True)
class PhaseCell:
    """Aggregated success statistics of one (d, m) cell."""

    d: int
    m: int
    trials: int
    successes: int
    rate: float
    wilson_lo: float
    wilson_hi: float

    def __post_init__(self):
        if not 0 <= self.successes <= self.trials:
            raise ValueError("successes out of range")
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError("rate out of range")
        if not self.wilson_lo <= self.rate <= self.wilson_hi:
            raise ValueError("Wilson interval must contain the rate")


@dataclass(frozen=True)
class PhaseTable:
    """All trial records of a sweep plus their per-cell aggregation."""

    records: tuple[TrialRecord, ...]
    cells: tuple[PhaseCell, ...]

    @classmethod
    def from_records(cls, records) -> "PhaseTable":
        records = tuple(sorted(records, key=lambda r: (r.d, r.m, r.trial_index)))
        groups: dict[tuple[int, int], list[TrialRecord]] = {}
        for r in records:
            groups.setdefault((r.d, r.m), []).append(r)
        cells = []
        for (d, m) in sorted(groups):
            rs = groups[(d, m)]
            successes = sum(1 for r in rs if r.success)
            lo, hi = wilson_interval(successes, len(rs))
            cells.append(PhaseCell(d=d, m=m, trials=len(rs), successes=successes,
                                   rate=successes / len(rs), wilson_lo=lo, wilson_hi=hi))
        return cls(records=records, cells=tuple(cells))


def wilson_interval(successes: int, trials: int, z: float = WILSON_Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    Behaves correctly at the boundary: 0 successes gives a lower bound of
    exactly 0, all successes an upper bound of exactly 1.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("successes out of range")
    p_hat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p_hat + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p_hat * (1.0 - p_hat) / trials + z2 / (4 * trials * trials)) / denom
    # Rounding can push the endpoints past the exact boundary values and
    # off the observed rate itself; pin both.
    lo = 0.0 if successes == 0 else max(0.0, min(center - half, p_hat))
    hi = 1.0 if successes == trials else min(1.0, max(center + half, p_hat))
    return lo, hi


def derived_seed(master_seed: int, d: int, m: int, trial_index: int) -> int:
    """The frozen per-trial seed derivation."""
    return mix64(master_seed, d, m, trial_index)


def run_trial(d: int, m: int, seed: int, method: str = "identity_perturbation",
              trial_index: int = 0, *, residual_tol: float = RESIDUAL_TOL,
              pd_tol: float = PD_TOL, timings: bool = False) -> TrialRecord:
    """One full trial: draw, fit, certify. Deterministic in all arguments."""
    if d < 2 or m < 1:
        raise ValueError("need d >= 2 and m >= 1")
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    start = _now_ms() if timings else 0.0
    s = draw_sample_set(d, m, seed)
    if method == "identity_perturbation":
        fit = identity_perturbation_fit(s, residual_tol=residual_tol, pd_tol=pd_tol)
    else:
        fit = least_norm_fit(s, residual_tol=residual_tol, pd_tol=pd_tol)
    a_norm = operator_norm(build_A(s))
    wall = (_now_ms() - start) if timings else 0.0
    return TrialRecord(
        d=d,
        m=m,
        trial_index=trial_index,
        derived_seed=seed,
        success=fit.success,
        N_min_eig=fit.N_min_eig,
        K_norm=fit.K_norm,
        max_residual=fit.max_residual,
        a_norm=a_norm,
        M_min_eig=fit.M_min_eig,
        wall_time=wall,
        reason=fit.reason,
    )


def _now_ms() -> float:
    return time.perf_counter() * 1000.0


def _run_job(args) -> TrialRecord:
    d, m, trial_index, master_seed, method, residual_tol, pd_tol, timings = args
    return run_trial(d, m, derived_seed(master_seed, d, m, trial_index), method,
                     trial_index, residual_tol=residual_tol, pd_tol=pd_tol,
                     timings=timings)


def resolve_workers(configured: int) -> int:
    """Effective worker count: env override, then config, 0 meaning one per CPU."""
    raw = os.environ.get(WORKERS_ENV_VAR)
    if raw is not None and raw.strip() != "":
        configured = int(raw)
        if configured < 0:
            raise ValueError(f"{WORKERS_ENV_VAR} must be >= 0")
    if configured == 0:
        return os.cpu_count() or 1
    return configured


def run_phase_sweep(cfg: ExperimentConfig) -> PhaseTable:
    """Run every cell of the config; deterministic regardless of parallelism."""
    jobs = [
        (d, m, t, cfg.master_seed, cfg.method, cfg.residual_tol, cfg.pd_tol, cfg.timings)
        for d in cfg.d_values
        for m in cfg.m_cells(d)
        for t in range(cfg.trials)
    ]
    workers = resolve_workers(cfg.workers)
    if workers <= 1 or len(jobs) <= 1:
        records = [_run_job(job) for job in jobs]
    else:
        chunk = max(1, len(jobs) // (8 * workers))
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_job, jobs, chunksize=chunk))
    return PhaseTable.from_records(records)


def estimate_transition(table: PhaseTable, d: int) -> float | None:
    """m at which the success rate first crosses 0.5, by increasing m.

    Linear interpolation between the bracketing cells; None when no cell
    pair brackets the crossing (all rates on one side, or no cells for
    this d).
    """
    cells = sorted((c for c in table.cells if c.d == d), key=lambda c: c.m)
    for a, b in zip(cells, cells[1:]):
        if a.rate >= 0.5 > b.rate:
            return a.m + (a.rate - 0.5) * (b.m - a.m) / (a.rate - b.rate)
    return None


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _record_row(r: TrialRecord) -> list[str]:
    return [str(r.d), str(r.m), str(r.trial_index), str(r.derived_seed),
            "1" if r.success else "0", _fmt(r.N_min_eig), _fmt(r.K_norm),
            _fmt(r.max_residual), _fmt(r.a_norm), _fmt(r.M_min_eig), _fmt(r.wall_time)]


def _record_from_strings(row) -> TrialRecord:
    return TrialRecord(
        d=int(row[0]), m=int(row[1]), trial_index=int(row[2]), derived_seed=int(row[3]),
        success=bool(int(row[4])), N_min_eig=float(row[5]), K_norm=float(row[6]),
        max_residual=float(row[7]), a_norm=float(row[8]), M_min_eig=float(row[9]),
        wall_time=float(row[10]))


def records_to_csv(records, path: str) -> None:
    """Records CSV: exactly the documented columns, sorted rows, 17 digits."""
    rows = sorted(records, key=lambda r: (r.d, r.m, r.trial_index))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_COLUMNS)
        for r in rows:
            writer.writerow(_record_row(r))


def records_from_csv(path: str) -> tuple[TrialRecord, ...]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(RECORD_COLUMNS):
            raise ValueError(f"unexpected records header: {header}")
        return tuple(_record_from_strings(row) for row in reader)


def summary_to_csv(cells, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for c in cells:
            writer.writerow([str(c.d), str(c.m), str(c.trials), str(c.successes),
                             _fmt(c.rate), _fmt(c.wilson_lo), _fmt(c.wilson_hi)])


def summary_from_csv(path: str) -> tuple[PhaseCell, ...]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(SUMMARY_COLUMNS):
            raise ValueError(f"unexpected summary header: {header}")
        return tuple(
            PhaseCell(d=int(r[0]), m=int(r[1]), trials=int(r[2]), successes=int(r[3]),
                      rate=float(r[4]), wilson_lo=float(r[5]), wilson_hi=float(r[6]))
            for r in reader)


def records_to_json(records, path: str) -> None:
    rows = sorted(records, key=lambda r: (r.d, r.m, r.trial_index))
    payload = [dict(zip(RECORD_COLUMNS, [r.d, r.m, r.trial_index, r.derived_seed,
                                         r.success, r.N_min_eig, r.K_norm,
                                         r.max_residual, r.a_norm, r.M_min_eig,
                                         r.wall_time])) for r in rows]
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def records_from_json(path: str) -> tuple[TrialRecord, ...]:
    with open(path) as fh:
        payload = json.load(fh)
    return tuple(
        TrialRecord(d=row["d"], m=row["m"], trial_index=row["trial"],
                    derived_seed=row["seed"], success=bool(row["success"]),
                    N_min_eig=row["n_min_eig"], K_norm=row["k_norm"],
                    max_residual=row["max_residual"], a_norm=row["a_norm"],
                    M_min_eig=row["m_min_eig"], wall_time=row["wall_ms"])
        for row in payload)


def summary_to_json(cells, path: str) -> None:
    payload = [dict(zip(SUMMARY_COLUMNS, [c.d, c.m, c.trials, c.successes, c.rate,
                                          c.wilson_lo, c.wilson_hi])) for c in cells]
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def summary_from_json(path: str) -> tuple[PhaseCell, ...]:
    with open(path) as fh:
        payload = json.load(fh)
    return tuple(PhaseCell(**row) for row in payload)
