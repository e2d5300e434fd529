"""Seeded samplers for labels, adjacency matrices, noise and the observed matrix."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelError, ModelSpec, build_omega, numerical_rank


class DomainError(ValueError):
    """A population entry lies outside the parameter domain of a distribution."""


@dataclass(frozen=True)
class RandomStream:
    """A reproducible random stream identified by ``(seed, stream)``.

    ``path`` names further sub-streams, e.g. ``(grid index, repetition)``;
    different paths give statistically independent generators.
    """

    seed: int
    stream: int = 0
    path: tuple[int, ...] = ()

    def child(self, *keys: int) -> "RandomStream":
        return RandomStream(self.seed, self.stream, self.path + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream, *self.path))
        return np.random.Generator(np.random.PCG64(ss))


def _rng(rng) -> np.random.Generator:
    if isinstance(rng, RandomStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class EdgeDistribution:
    """Edge-weight distribution with mean Omega(i, j).

    ``kind`` is one of :data:`DISTRIBUTIONS`. ``sigma2A`` is the Normal
    variance, ``m`` the Binomial trial count, ``b`` the Gamma rate in the
    Gamma(b*Omega, rate b) form and ``a`` the shape in Gamma(a, rate a/Omega).
    """

    kind: str
    sigma2A: float | None = None
    m: int | None = None
    b: float | None = None
    a: float | None = None

    def __post_init__(self):
        if self.kind not in DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.kind!r}; choose from {', '.join(DISTRIBUTIONS)}")
        need = {"normal": "sigma2A", "binomial": "m", "gamma_scale": "b", "gamma_shape": "a"}.get(self.kind)
        if need and getattr(self, need) is None:
            raise ValueError(f"{self.kind} needs parameter {need}")
        if self.kind == "normal" and self.sigma2A < 0:
            raise ValueError("sigma2A must be >= 0")
        if self.kind == "binomial" and (int(self.m) != self.m or self.m < 1):
            raise ValueError("m must be a positive integer")
        if self.kind == "gamma_scale" and not self.b > 0:
            raise ValueError("b must be > 0")
        if self.kind == "gamma_shape" and not self.a > 0:
            raise ValueError("a must be > 0")

    def check_domain(self, Omega: np.ndarray) -> None:
        Omega = np.asarray(Omega, dtype=float)
        if self.kind == "normal":
            bad = ~np.isfinite(Omega)
            why = "must be finite"
        elif self.kind == "bernoulli":
            bad = (Omega < 0) | (Omega > 1)
            why = "must lie in [0, 1]"
        elif self.kind == "binomial":
            bad = (Omega < 0) | (Omega > self.m)
            why = f"must lie in [0, m={self.m}]"
        elif self.kind == "poisson":
            bad = Omega < 0
            why = "must be >= 0"
        else:
            bad = ~(Omega > 0)
            why = "must be > 0"
        if np.any(bad):
            i, j = (int(v) for v in np.argwhere(bad)[0])
            raise DomainError(f"{self.kind}: Omega({i},{j}) = {Omega[i, j]!r} {why}")

    def variance(self, Omega: np.ndarray) -> np.ndarray:
        """Closed-form entrywise variance of A."""
        Omega = np.asarray(Omega, dtype=float)
        if self.kind == "normal":
            return np.full_like(Omega, self.sigma2A)
        if self.kind == "bernoulli":
            return Omega * (1 - Omega)
        if self.kind == "binomial":
            q = Omega / self.m
            return self.m * q * (1 - q)
        if self.kind == "poisson":
            return Omega.copy()
        if self.kind == "exponential":
            return Omega ** 2
        if self.kind == "gamma_scale":
            return Omega / self.b
        return Omega ** 2 / self.a

    def draw(self, mean: np.ndarray, gen: np.random.Generator) -> np.ndarray:
        mean = np.asarray(mean, dtype=float)
        k = self.kind
        if k == "normal":
            return mean + math.sqrt(self.sigma2A) * gen.standard_normal(mean.shape)
        if k == "bernoulli":
            return (gen.random(mean.shape) < mean).astype(float)
        if k == "binomial":
            return gen.binomial(int(self.m), mean / self.m).astype(float)
        if k == "poisson":
            return gen.poisson(mean).astype(float)
        if k == "exponential":
            return gen.exponential(mean)
        if k == "gamma_scale":
            return gen.gamma(self.b * mean, 1.0 / self.b)
        return gen.gamma(self.a, mean / self.a)


DISTRIBUTIONS = ("bernoulli", "normal", "binomial", "poisson", "exponential", "gamma_scale", "gamma_shape")


def sample_labels(n: int, K: int, rng) -> np.ndarray:
    """i.i.d. uniform labels in [0, K), redrawn whole until no community is empty."""
    if K < 1 or n < K:
        raise ModelError(f"cannot fill K={K} communities with n={n} nodes")
    gen = _rng(rng)
    while True:
        labels = gen.integers(0, K, size=n)
        if np.bincount(labels, minlength=K).min() > 0:
            return labels


def _symmetric_from_upper(values: np.ndarray, n: int) -> np.ndarray:
    iu = np.triu_indices(n)
    M = np.zeros((n, n))
    M[iu] = values
    M.T[iu] = values
    return M


def sample_adjacency(Omega, dist: EdgeDistribution, rng) -> np.ndarray:
    """Symmetric A with independent upper-triangle entries (diagonal included)
    drawn from ``dist`` with mean Omega(i, j)."""
    Omega = np.asarray(Omega, dtype=float)
    dist.check_domain(Omega)
    n = Omega.shape[0]
    upper = Omega[np.triu_indices(n)]
    return _symmetric_from_upper(dist.draw(upper, _rng(rng)), n)


@dataclass(frozen=True)
class NoiseSpec:
    sigma2W: float = 0.0

    def __post_init__(self):
        if self.sigma2W < 0:
            raise ValueError("sigma2W must be >= 0")


def sample_noise(n: int, noise: NoiseSpec | float, rng) -> np.ndarray:
    """Symmetric zero-mean Normal noise with variance sigma2W."""
    s2 = noise.sigma2W if isinstance(noise, NoiseSpec) else float(noise)
    if s2 < 0:
        raise ValueError("sigma2W must be >= 0")
    if s2 == 0:
        return np.zeros((n, n))
    m = n * (n + 1) // 2
    return _symmetric_from_upper(math.sqrt(s2) * _rng(rng).standard_normal(m), n)


def observe(A, W) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    W = np.asarray(W, dtype=float)
    if A.shape != W.shape:
        raise ValueError(f"shape mismatch: A {A.shape} vs W {W.shape}")
    return A + W


@dataclass(frozen=True)
class AdjacencyBundle:
    A: np.ndarray
    W: np.ndarray
    Ahat: np.ndarray


def sample_bundle(Omega, dist: EdgeDistribution, noise: NoiseSpec, rng: RandomStream) -> AdjacencyBundle:
    A = sample_adjacency(Omega, dist, rng.child(0))
    W = sample_noise(A.shape[0], noise, rng.child(1))
    return AdjacencyBundle(A=A, W=W, Ahat=observe(A, W))


def gamma_bound(dist: EdgeDistribution, rho: float) -> float:
    """Distribution-specific value of max Var(A) / rho used in the rate bounds."""
    k = dist.kind
    if k in ("bernoulli", "binomial", "poisson"):
        return 1.0
    if k == "normal":
        return dist.sigma2A / rho
    if k == "exponential":
        return rho
    if k == "gamma_scale":
        return 1.0 / dist.b
    return rho / dist.a


@dataclass(frozen=True)
class AssumptionReport:
    gamma: float
    gamma_exact: float
    sparsity_ratio: float
    rho_over_sigma2W: float
    sigmaK0_P: float
    flags: tuple[str, ...]


def check_assumptions(spec: ModelSpec, dist: EdgeDistribution, noise: NoiseSpec,
                      min_sparsity_ratio: float = 10.0) -> AssumptionReport:
    """Advisory diagnostics for the variance and sparsity assumptions.

    ``sparsity_ratio`` is (gamma*rho*n + sigma2W*n) / log(n). Nothing here
    raises; problems are listed in ``flags``.
    """
    Omega = build_omega(spec)
    n, rho = spec.n, spec.rho
    flags = []
    g = gamma_bound(dist, rho)
    try:
        dist.check_domain(Omega)
        g_exact = float(np.max(dist.variance(Omega))) / rho
    except DomainError as exc:
        g_exact = float("nan")
        flags.append(f"domain: {exc}")
    ratio = (g * rho * n + noise.sigma2W * n) / math.log(n) if n > 1 else float("inf")
    if ratio < min_sparsity_ratio:
        flags.append(f"sparsity ratio {ratio:.3g} < {min_sparsity_ratio:g}")
    rs = rho / noise.sigma2W if noise.sigma2W > 0 else float("inf")
    if rs < 1:
        flags.append(f"rho / sigma2W = {rs:.3g} < 1: noise dominates the signal")
    s = np.linalg.svd(spec.P, compute_uv=False)
    sK0 = float(s[spec.K0 - 1])
    if sK0 < 1e-6 * s[0]:
        flags.append(f"P is nearly rank deficient: sigma_K0(P) = {sK0:.3g}")
    if numerical_rank(Omega) != spec.K0:
        flags.append("rank(Omega) differs from K0")
    return AssumptionReport(gamma=g, gamma_exact=g_exact, sparsity_ratio=ratio,
                            rho_over_sigma2W=rs, sigmaK0_P=sK0, flags=tuple(flags))
