"""Experiment protocols: synthetic parameter sweeps and real-network noise sweeps."""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dataio import Dataset
from .evaluation import ErrorReport, delta_separation, evaluate
from .model import ModelError, ModelSpec, build_omega, validate_P
from .sampling import (DISTRIBUTIONS, DomainError, EdgeDistribution, NoiseSpec, RandomStream,
                       sample_adjacency, sample_labels, sample_noise)
from .spectral import KMeansConfig, dfa

SWEEPABLE = ("rho", "sigma2A", "m", "sigma2W", "b", "a", "n")
METRICS = ("hamming", "hamming_raw_l0", "fhat", "spectral_deviation", "delta")

# stream namespaces
_LABELS, _ADJ, _NOISE, _KMEANS = 0, 1, 2, 3

P_NORMAL = np.array([[-1.0, -0.4, 0.5],
                     [-0.4, 0.9, 0.2],
                     [0.5, 0.2, 0.8]])
P_COUNT = np.array([[1.0, 0.4, 0.5],
                    [0.4, 0.9, 0.2],
                    [0.5, 0.2, 0.8]])


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep: a model, an edge distribution and a single swept parameter."""

    experiment: str
    n: int
    K: int
    K0: int
    P: np.ndarray
    distribution: str
    sweep_var: str
    grid: tuple[float, ...]
    rho: float | None = None
    sigma2A: float | None = None
    m: int | None = None
    b: float | None = None
    a: float | None = None
    sigma2W: float = 0.0
    reps: int = 50
    seed: int = 42
    resample_labels: bool = False

    def __post_init__(self):
        object.__setattr__(self, "P", np.array(self.P, dtype=float))
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.distribution!r}")
        if self.sweep_var not in SWEEPABLE:
            raise ValueError(f"cannot sweep {self.sweep_var!r}")
        if not self.grid:
            raise ValueError("empty grid")
        if self.reps < 1:
            raise ValueError(f"reps must be >= 1, got {self.reps}")
        if self.P.shape != (self.K, self.K):
            raise ValueError(f"P is {self.P.shape}, expected ({self.K}, {self.K})")
        if self.sweep_var != "rho" and self.rho is None:
            raise ValueError("rho is required")

    @property
    def noise_sweep(self) -> bool:
        return self.sweep_var == "sigma2W"

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def at(self, value: float) -> dict:
        """Parameter values at one grid point."""
        params = {k: getattr(self, k) for k in ("n", "rho", "sigma2A", "m", "b", "a", "sigma2W")}
        params[self.sweep_var] = int(round(value)) if self.sweep_var in ("m", "n") else value
        return params

    def distribution_at(self, value: float) -> EdgeDistribution:
        p = self.at(value)
        return EdgeDistribution(self.distribution, sigma2A=p["sigma2A"], m=p["m"], b=p["b"], a=p["a"])


def _grid(start: float, step: float, end: float) -> tuple[float, ...]:
    count = int(math.floor((end - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 12) for i in range(count))


RHO_GRID = _grid(0.1, 0.1, 2.0)
SIGMA2W_GRID = _grid(0.05, 0.05, 2.0)
REALDATA_GRID = _grid(0.0, 0.01, 0.2)

_BUILTINS = {
    "1a": dict(distribution="normal", P=P_NORMAL, sigma2A=3.0, sweep_var="rho", grid=RHO_GRID),
    "1b": dict(distribution="normal", P=P_NORMAL, rho=0.4, sweep_var="sigma2A", grid=_grid(0.1, 0.1, 4.0)),
    "1c": dict(distribution="normal", P=P_NORMAL, rho=0.8, sigma2A=1.0, sweep_var="sigma2W", grid=SIGMA2W_GRID),
    "2a": dict(distribution="binomial", P=P_COUNT, m=3, sweep_var="rho", grid=RHO_GRID),
    "2b": dict(distribution="binomial", P=P_COUNT, rho=0.4, sweep_var="m", grid=_grid(1, 1, 20)),
    "2c": dict(distribution="binomial", P=P_COUNT, rho=0.8, m=3, sweep_var="sigma2W", grid=SIGMA2W_GRID),
    "3a": dict(distribution="poisson", P=P_COUNT, sweep_var="rho", grid=RHO_GRID),
    # m = 3 in the 3b protocol has no meaning for Poisson and is dropped
    "3b": dict(distribution="poisson", P=P_COUNT, rho=0.8, sweep_var="sigma2W", grid=SIGMA2W_GRID),
    "4": dict(distribution="exponential", P=P_COUNT, sweep_var="rho", grid=RHO_GRID),
}
BUILTIN_IDS = tuple(_BUILTINS)


def builtin_spec(experiment: str, **overrides) -> ExperimentSpec:
    """The synthetic protocol for an experiment id (n=200, K=K0=3, 50 reps)."""
    if experiment not in _BUILTINS:
        raise ValueError(f"unknown experiment {experiment!r}; built-ins are {', '.join(BUILTIN_IDS)}")
    params = dict(experiment=experiment, n=200, K=3, K0=3, reps=50, seed=42)
    params.update(_BUILTINS[experiment])
    params.update(overrides)
    return ExperimentSpec(**params)


@dataclass
class SweepRecord:
    value: float
    params: dict
    reports: list[ErrorReport]
    elapsed_ms: list[float] = field(default_factory=list)
    mean: dict[str, float] = field(default_factory=dict)
    sd: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.mean:
            self.mean, self.sd = aggregate(self.reports)


def aggregate(reports: list[ErrorReport]) -> tuple[dict, dict]:
    """Mean and sample standard deviation of each metric.

    Sums use math.fsum, so the result does not depend on repetition order.
    """
    mean, sd = {}, {}
    for key in METRICS:
        vals = [getattr(r, key) for r in reports]
        if not vals or any(math.isnan(v) for v in vals):
            mean[key] = sd[key] = math.nan
            continue
        mu = math.fsum(vals) / len(vals)
        mean[key] = mu
        sd[key] = math.sqrt(math.fsum((v - mu) ** 2 for v in vals) / (len(vals) - 1)) if len(vals) > 1 else 0.0
    return mean, sd


def thread_count() -> int:
    raw = os.environ.get("DFM_THREADS", "0").strip() or "0"
    try:
        t = int(raw)
    except ValueError:
        t = 0
    return t if t > 0 else (os.cpu_count() or 1)


def _map(fn, items, threads: int | None):
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def validate_domain(spec: ExperimentSpec) -> None:
    """Check every grid point's distribution parameters against rho * P."""
    for value in spec.grid:
        p = spec.at(value)
        try:
            if not p["rho"] > 0:
                raise ModelError(f"rho must be positive, got {p['rho']}")
            if p["sigma2W"] < 0:
                raise ModelError("sigma2W must be >= 0")
            if p["n"] < spec.K:
                raise ModelError(f"n={p['n']} is smaller than K={spec.K}")
            dist = spec.distribution_at(value)
            dist.check_domain(p["rho"] * spec.P)
        except (DomainError, ModelError, ValueError) as exc:
            raise ExperimentError(f"{spec.sweep_var}={value:g}: {exc}") from exc


def run_sweep(spec: ExperimentSpec, threads: int | None = None, timing: bool = False) -> list[SweepRecord]:
    """Run the detector over every (grid value, repetition) pair of a sweep.

    Labels are drawn once for the whole sweep (once per repetition with
    ``resample_labels``). Parameter sweeps draw a fresh A per repetition;
    noise sweeps keep one A and redraw only W, unless ``resample_labels``.
    Random streams are keyed by repetition, not by grid index, so every grid
    value sees the same underlying draws (common random numbers). Output is
    identical for any thread count.
    """
    validate_domain(spec)
    root = RandomStream(spec.seed)
    try:
        validate_P(spec.P, spec.K0)
    except ModelError as exc:
        raise ExperimentError(str(exc)) from exc

    fixed_A: dict = {}
    if spec.noise_sweep and not spec.resample_labels:
        p = spec.at(spec.grid[0])
        labels = sample_labels(p["n"], spec.K, root.child(_LABELS))
        model = ModelSpec.from_labels(labels, spec.P, p["rho"], spec.K0)
        omega = build_omega(model)
        A = sample_adjacency(omega, spec.distribution_at(spec.grid[0]), root.child(_ADJ))
        fixed_A = dict(labels=labels, model=model, omega=omega, A=A)

    def setup(g: int, r: int):
        value = spec.grid[g]
        p = spec.at(value)
        if fixed_A:
            return fixed_A["labels"], fixed_A["model"], fixed_A["omega"], fixed_A["A"]
        key = (_LABELS, r) if spec.resample_labels else (_LABELS,)
        labels = sample_labels(p["n"], spec.K, root.child(*key))
        model = ModelSpec.from_labels(labels, spec.P, p["rho"], spec.K0)
        omega = build_omega(model)
        A = sample_adjacency(omega, spec.distribution_at(value), root.child(_ADJ, r))
        return labels, model, omega, A

    deltas: dict = {}

    def delta_for(labels, model, omega) -> float:
        key = labels.tobytes() + np.float64(model.rho).tobytes()
        if key not in deltas:
            deltas[key] = delta_separation(omega, model.Z, spec.K0).delta
        return deltas[key]

    def one(task):
        g, r = task
        t0 = time.perf_counter()
        labels, model, omega, A = setup(g, r)
        s2w = spec.at(spec.grid[g])["sigma2W"]
        W = sample_noise(A.shape[0], NoiseSpec(s2w), root.child(_NOISE, r))
        Ahat = A + W
        est = dfa(Ahat, spec.K, spec.K0, KMeansConfig(rng=root.child(_KMEANS, r)))
        report = evaluate(labels, est, spec.K, Ahat=Ahat, Omega=omega)
        elapsed = (time.perf_counter() - t0) * 1e3
        return report, labels, model, omega, elapsed

    tasks = [(g, r) for g in range(len(spec.grid)) for r in range(spec.reps)]
    try:
        results = _map(one, tasks, threads)
    except (DomainError, ModelError) as exc:
        raise ExperimentError(str(exc)) from exc

    records = []
    for g, value in enumerate(spec.grid):
        chunk = results[g * spec.reps:(g + 1) * spec.reps]
        reports = []
        for report, labels, model, omega, _ in chunk:
            report.delta = delta_for(labels, model, omega)
            reports.append(report)
        elapsed = [c[4] for c in chunk] if timing else []
        records.append(SweepRecord(value=value, params=spec.at(value), reports=reports, elapsed_ms=elapsed))
    return records


def run_realdata(dataset: Dataset, grid=REALDATA_GRID, reps: int = 50, seed: int = 42,
                 threads: int | None = None, timing: bool = False) -> list[SweepRecord]:
    """Noise sweep on a real network: observe A + W and compare DFA to the truth."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    grid = tuple(float(g) for g in grid)
    if any(g < 0 for g in grid):
        raise ValueError("sigma2W grid must be nonnegative")
    root = RandomStream(seed)
    K = dataset.K

    def one(task):
        g, r = task
        t0 = time.perf_counter()
        W = sample_noise(dataset.n, NoiseSpec(grid[g]), root.child(_NOISE, r))
        est = dfa(dataset.A + W, K, K, KMeansConfig(rng=root.child(_KMEANS, r)))
        return evaluate(dataset.truth, est, K), (time.perf_counter() - t0) * 1e3

    tasks = [(g, r) for g in range(len(grid)) for r in range(reps)]
    results = _map(one, tasks, threads)
    records = []
    for g, value in enumerate(grid):
        chunk = results[g * reps:(g + 1) * reps]
        records.append(SweepRecord(
            value=value,
            params=dict(n=dataset.n, rho=None, sigma2A=None, m=None, sigma2W=value),
            reports=[c[0] for c in chunk],
            elapsed_ms=[c[1] for c in chunk] if timing else []))
    return records


def records_to_rows(records: list[SweepRecord], experiment: str, distribution: str,
                    K: int, K0: int, seed: int) -> list[dict]:
    """Flatten sweep records into CSV rows: one per repetition, then mean and sd."""
    rows = []
    for rec in records:
        base = dict(experiment=experiment, distribution=distribution, n=rec.params.get("n"),
                    K=K, K0=K0, rho=rec.params.get("rho"), sigma2A=rec.params.get("sigma2A"),
                    m=rec.params.get("m"), sigma2W=rec.params.get("sigma2W"), seed=seed)
        for r, rep in enumerate(rec.reports):
            row = dict(base, rep=r, **{k: getattr(rep, k) for k in METRICS})
            if rec.elapsed_ms:
                row["elapsed_ms"] = round(rec.elapsed_ms[r], 3)
            rows.append(row)
        rows.append(dict(base, rep="mean", **rec.mean))
        rows.append(dict(base, rep="sd", **rec.sd))
    return rows


def sweep_rows(spec: ExperimentSpec, records: list[SweepRecord]) -> list[dict]:
    return records_to_rows(records, spec.experiment, spec.distribution, spec.K, spec.K0, spec.seed)


def realdata_rows(dataset: Dataset, records: list[SweepRecord], seed: int) -> list[dict]:
    return records_to_rows(records, dataset.name, "observed", dataset.K, dataset.K, seed)


def mean_curve(records: list[SweepRecord], metric: str = "hamming") -> tuple[np.ndarray, np.ndarray]:
    return (np.array([r.value for r in records]), np.array([r.mean[metric] for r in records]))


def with_overrides(spec: ExperimentSpec, **kw) -> ExperimentSpec:
    return replace(spec, **{k: v for k, v in kw.items() if v is not None})

