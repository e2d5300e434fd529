"""Error criteria, spectral diagnostics and theoretical rate expressions."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .model import ModelSpec, build_omega, canonical_index_set, community_sizes
from .sampling import EdgeDistribution, NoiseSpec, gamma_bound
from .spectral import spectral_norm, top_eigs

EXHAUSTIVE_MAX_K = 8


def confusion(truth, est, K: int) -> np.ndarray:
    """K x K table; entry (k, j) counts nodes with true label k and estimate j."""
    truth = np.asarray(truth, dtype=int)
    est = np.asarray(est, dtype=int)
    if truth.shape != est.shape:
        raise ValueError(f"length mismatch: {truth.size} vs {est.size}")
    for name, lab in (("truth", truth), ("estimate", est)):
        if lab.size and (lab.min() < 0 or lab.max() >= K):
            raise ValueError(f"{name} labels outside [0, {K})")
    C = np.zeros((K, K), dtype=int)
    np.add.at(C, (truth, est), 1)
    return C


def _permutations(K: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(K))), dtype=int).reshape(-1, K)


def _method(method: str, K: int) -> str:
    if method == "auto":
        return "enumerate" if K <= EXHAUSTIVE_MAX_K else "assignment"
    if method not in ("enumerate", "assignment"):
        raise ValueError(f"unknown method {method!r}")
    return method


def matched_count(truth, est, K: int, method: str = "auto") -> int:
    """Largest number of nodes on which the labelings agree under a relabeling.

    ``method`` picks exhaustive search over the K! permutations or an optimal
    assignment on the confusion matrix; ``auto`` enumerates up to K = 8.
    """
    C = confusion(truth, est, K)
    if _method(method, K) == "enumerate":
        perms = _permutations(K)
        return int(C[np.arange(K), perms].sum(axis=1).max())
    rows, cols = linear_sum_assignment(C, maximize=True)
    return int(C[rows, cols].sum())


def hamming_error(truth, est, K: int, method: str = "auto") -> float:
    """Fraction of misplaced nodes under the best label permutation."""
    n = len(truth)
    if n == 0:
        return 0.0
    return (n - matched_count(truth, est, K, method)) / n


def hamming_l0(truth, est, K: int) -> float:
    """n^-1 min_J ||Zhat J - Z||_0; every misplaced node contributes 2 entries."""
    return 2.0 * hamming_error(truth, est, K)


def _fhat_costs(truth, est, K: int) -> np.ndarray:
    C = confusion(truth, est, K).astype(float)
    n_true = C.sum(axis=1)
    n_est = C.sum(axis=0)
    if np.any(n_true == 0):
        raise ValueError("every true community must be non-empty")
    return (n_true[:, None] + n_est[None, :] - 2 * C) / n_true[:, None]


def _bottleneck(cost: np.ndarray) -> float:
    # smallest threshold admitting a perfect matching
    K = cost.shape[0]
    values = np.unique(cost)
    lo, hi = 0, values.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        graph = csr_matrix((cost <= values[mid]).astype(np.int8))
        match = maximum_bipartite_matching(graph, perm_type="column")
        if np.all(match >= 0) and match.size == K:
            hi = mid
        else:
            lo = mid + 1
    return float(values[lo])


def f_hat(truth, est, K: int, method: str = "auto") -> float:
    """Worst-community symmetric-difference proportion, minimized over
    permutations of the estimated labels.

    Beyond K = 8 (or with ``method="assignment"``) the min-max problem is
    solved exactly as a bottleneck assignment.
    """
    cost = _fhat_costs(truth, est, K)
    if _method(method, K) == "enumerate":
        perms = _permutations(K)
        return float(cost[np.arange(K), perms].max(axis=1).min())
    return _bottleneck(cost)


def spectral_deviation(Ahat, Omega) -> float:
    Ahat = np.asarray(Ahat, dtype=float)
    Omega = np.asarray(Omega, dtype=float)
    if Ahat.shape != Omega.shape:
        raise ValueError(f"shape mismatch: {Ahat.shape} vs {Omega.shape}")
    return spectral_norm(Ahat - Omega)


@dataclass(frozen=True)
class Separation:
    delta: float
    reference: float
    B: np.ndarray = field(repr=False)


def delta_separation(Omega, Z, K0: int) -> Separation:
    """Minimum pairwise distance between the rows of U restricted to the
    canonical index set. ``reference`` is sqrt(2 / n_max) when K0 = K, else nan."""
    Z = np.asarray(Z)
    K = Z.shape[1]
    B = top_eigs(Omega, K0).U[canonical_index_set(Z)]
    if K < 2:
        delta = math.inf
    else:
        d = np.linalg.norm(B[:, None, :] - B[None, :, :], axis=-1)
        delta = float(d[np.triu_indices(K, 1)].min())
    ref = math.sqrt(2.0 / community_sizes(Z, K0).n_max) if K0 == K else math.nan
    return Separation(delta=delta, reference=ref, B=B)


@dataclass(frozen=True)
class SigmaBound:
    sigmaK0_Omega: float
    bound: float
    holds: bool
    bound_nmin: float


def sigma_lower_bound_check(spec: ModelSpec, rtol: float = 1e-6) -> SigmaBound:
    """Compare sigma_K0(Omega) with rho * sigma_K0(P) * n_K0.

    ``bound_nmin`` replaces n_K0 by n_min, which is a valid lower bound for
    any K0 (it coincides with ``bound`` when K0 = K).
    """
    s_omega = np.linalg.svd(build_omega(spec), compute_uv=False)[spec.K0 - 1]
    s_p = np.linalg.svd(spec.P, compute_uv=False)[spec.K0 - 1]
    sizes = spec.sizes()
    bound = spec.rho * s_p * sizes.n_K0
    return SigmaBound(
        sigmaK0_Omega=float(s_omega),
        bound=float(bound),
        holds=bool(s_omega >= bound - rtol * bound),
        bound_nmin=float(spec.rho * s_p * sizes.n_min),
    )


def theoretical_rate(spec: ModelSpec, dist: EdgeDistribution, noise: NoiseSpec,
                     delta: float, gamma: float | None = None) -> dict[str, float]:
    """Rate expressions for f_hat without their unspecified constants.

    Keys ``general``, ``equal_rank`` and ``balanced`` carry the noisy forms;
    the ``noiseless_*`` keys drop the sigma2W term (rho dominating the noise).
    ``equal_rank`` values are nan unless K0 = K.
    """
    if not delta > 0:
        raise ValueError("delta must be positive for the rate expressions")
    g = gamma_bound(dist, spec.rho) if gamma is None else gamma
    n, K, K0, rho = spec.n, spec.K, spec.K0, spec.rho
    sz = spec.sizes()
    s2 = float(np.linalg.svd(spec.P, compute_uv=False)[K0 - 1]) ** 2
    logn = math.log(n)
    var = g * rho * n + noise.sigma2W * n
    out = {
        "general": K0 * K * var * logn / (s2 * rho ** 2 * delta ** 2 * sz.n_K0 ** 2 * sz.n_min),
        "balanced": var * logn / (s2 * rho ** 2 * n ** 2),
        "noiseless_general": K0 * K * g * n * logn / (s2 * rho * delta ** 2 * sz.n_K0 ** 2 * sz.n_min),
        "noiseless_balanced": g * logn / (s2 * rho * n),
    }
    if K0 == K:
        out["equal_rank"] = K ** 2 * var * sz.n_max * logn / (s2 * rho ** 2 * sz.n_min ** 3)
        out["noiseless_equal_rank"] = K ** 2 * g * sz.n_max * n * logn / (s2 * rho * sz.n_min ** 3)
    else:
        out["equal_rank"] = math.nan
        out["noiseless_equal_rank"] = math.nan
    out["deviation_scale"] = math.sqrt(var * logn)
    return out


@dataclass
class ErrorReport:
    hamming: float
    hamming_raw_l0: float
    fhat: float
    spectral_deviation: float = math.nan
    delta: float = math.nan
    rate_values: dict[str, float] = field(default_factory=dict)


def evaluate(truth, est, K: int, Ahat=None, Omega=None, delta: float = math.nan) -> ErrorReport:
    dev = spectral_deviation(Ahat, Omega) if Ahat is not None and Omega is not None else math.nan
    h = hamming_error(truth, est, K)
    return ErrorReport(hamming=h, hamming_raw_l0=2.0 * h, fhat=f_hat(truth, est, K),
                       spectral_deviation=dev, delta=delta)
