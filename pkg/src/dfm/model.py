"""Model parameterization: labels, membership matrices, connectivity and
population matrices.

Labels are 0-based integer arrays inside the library. Files and the CLI use
1-based community ids; convert with :func:`to_one_based` / :func:`from_one_based`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RANK_RTOL = 1e-10
NORM_TOL = 1e-12


class ModelError(ValueError):
    """Raised when model parameters violate a structural constraint."""


def numerical_rank(M: np.ndarray, rtol: float = RANK_RTOL) -> int:
    s = np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s >= rtol * s[0]))


def to_one_based(labels) -> np.ndarray:
    return np.asarray(labels, dtype=int) + 1


def from_one_based(labels) -> np.ndarray:
    return np.asarray(labels, dtype=int) - 1


def check_labels(labels, K: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ModelError("labels must be a 1-d vector")
    if not np.issubdtype(labels.dtype, np.integer):
        if not np.all(np.equal(np.mod(labels, 1), 0)):
            raise ModelError("labels must be integers")
        labels = labels.astype(int)
    if K < 1:
        raise ModelError(f"K must be positive, got {K}")
    bad = (labels < 0) | (labels >= K)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ModelError(f"label {labels[i]} of node {i} outside [0, {K})")
    counts = np.bincount(labels, minlength=K)
    if np.any(counts == 0):
        empty = int(np.flatnonzero(counts == 0)[0])
        raise ModelError(f"community {empty} is empty; rank(Z) would be < K")
    return labels.astype(int)


def labels_to_membership(labels, K: int) -> np.ndarray:
    """One-hot n x K membership matrix of a label vector.

    Every community must be non-empty so that rank(Z) = K.
    """
    labels = check_labels(labels, K)
    Z = np.zeros((labels.size, K), dtype=int)
    Z[np.arange(labels.size), labels] = 1
    return Z


def membership_to_labels(Z) -> np.ndarray:
    Z = np.asarray(Z)
    if Z.ndim != 2:
        raise ModelError("membership matrix must be 2-d")
    if not np.all((Z == 0) | (Z == 1)):
        raise ModelError("membership entries must be 0 or 1")
    sums = Z.sum(axis=1)
    bad = np.flatnonzero(sums != 1)
    if bad.size:
        i = int(bad[0])
        raise ModelError(f"row {i} of Z has row sum {int(sums[i])}, expected 1")
    return np.argmax(Z, axis=1).astype(int)


@dataclass(frozen=True)
class CommunitySizes:
    sizes: tuple[int, ...]
    n_min: int
    n_max: int
    n_K0: int


def community_sizes(Z, K0: int) -> CommunitySizes:
    """Community sizes plus n_min, n_max and n_K0, the K0-th largest size."""
    Z = np.asarray(Z)
    sizes = Z.sum(axis=0).astype(int)
    if not 1 <= K0 <= sizes.size:
        raise ModelError(f"K0={K0} outside [1, {sizes.size}]")
    ordered = np.sort(sizes)[::-1]
    return CommunitySizes(
        sizes=tuple(int(s) for s in sizes),
        n_min=int(ordered[-1]),
        n_max=int(ordered[0]),
        n_K0=int(ordered[K0 - 1]),
    )


def canonical_index_set(Z) -> np.ndarray:
    """Smallest node index of each community, ordered by community id."""
    labels = membership_to_labels(Z)
    K = np.asarray(Z).shape[1]
    idx = np.full(K, -1, dtype=int)
    # reversed so the smallest index is written last
    for i in range(labels.size - 1, -1, -1):
        idx[labels[i]] = i
    if np.any(idx < 0):
        raise ModelError("Z has an empty column")
    return idx


def normalize_P(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    m = np.max(np.abs(P))
    if m == 0:
        raise ModelError("P is the zero matrix")
    return P / m


def validate_P(P, K0: int | None = None) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ModelError(f"P must be square, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise ModelError("P has non-finite entries")
    if not np.allclose(P, P.T, rtol=0, atol=NORM_TOL):
        raise ModelError("P is not symmetric")
    m = np.max(np.abs(P))
    if abs(m - 1.0) > NORM_TOL:
        raise ModelError(f"max |P(k,l)| must be 1, got {m!r}; see normalize_P")
    r = numerical_rank(P)
    if K0 is not None and r != K0:
        raise ModelError(f"rank(P) = {r} but K0 = {K0}")
    return P


@dataclass(frozen=True)
class ModelSpec:
    """Parameters (n, K, K0, rho, P, Z) of a distribution-free block model."""

    P: np.ndarray
    Z: np.ndarray
    K0: int
    rho: float
    labels: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        P = validate_P(self.P, self.K0)
        Z = np.asarray(self.Z, dtype=int)
        labels = membership_to_labels(Z)
        K = P.shape[0]
        if Z.shape[1] != K:
            raise ModelError(f"Z has {Z.shape[1]} columns but P is {K}x{K}")
        check_labels(labels, K)
        if not self.rho > 0:
            raise ModelError(f"rho must be positive, got {self.rho}")
        if not 1 <= self.K0 <= K <= Z.shape[0]:
            raise ModelError("need 1 <= K0 <= K <= n")
        P = P.copy()
        Z = Z.copy()
        P.flags.writeable = False
        Z.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "K0", int(self.K0))

    @classmethod
    def from_labels(cls, labels, P, rho: float, K0: int | None = None) -> "ModelSpec":
        P = np.asarray(P, dtype=float)
        if K0 is None:
            K0 = numerical_rank(P)
        return cls(P=P, Z=labels_to_membership(labels, P.shape[0]), K0=K0, rho=rho)

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def K(self) -> int:
        return self.P.shape[0]

    def sizes(self) -> CommunitySizes:
        return community_sizes(self.Z, self.K0)

    def with_rho(self, rho: float) -> "ModelSpec":
        return ModelSpec(P=self.P, Z=self.Z, K0=self.K0, rho=rho)


def build_omega(spec: ModelSpec) -> np.ndarray:
    """Population matrix rho * Z P Z', i.e. Omega(i, j) = rho * P(l(i), l(j))."""
    lab = spec.labels
    return spec.rho * spec.P[np.ix_(lab, lab)]


def recover_from_omega(Omega, labels, rho: float) -> np.ndarray:
    """Read P back off the population matrix at the canonical index set."""
    K = int(np.max(labels)) + 1
    idx = canonical_index_set(labels_to_membership(labels, K))
    return np.asarray(Omega)[np.ix_(idx, idx)] / rho


def random_connectivity(K: int, K0: int, rng: np.random.Generator,
                        nonnegative: bool = False) -> np.ndarray:
    """Random symmetric P of rank K0 with max |entry| = 1.

    Built as Q D Q' with K - K0 zero diagonal entries in D. With
    ``nonnegative`` the result is shifted into [0, 1] only when that keeps
    the rank, which holds for K0 = K generically; otherwise a nonnegative
    low-rank factor X X' is used.
    """
    if not 1 <= K0 <= K:
        raise ModelError("need 1 <= K0 <= K")
    for _ in range(100):
        if nonnegative:
            X = rng.uniform(0.05, 1.0, size=(K, K0))
            P = X @ X.T
        else:
            Q, _ = np.linalg.qr(rng.standard_normal((K, K)))
            d = rng.uniform(0.2, 1.0, size=K) * rng.choice([-1.0, 1.0], size=K)
            d[K0:] = 0.0
            P = Q @ np.diag(d) @ Q.T
        P = 0.5 * (P + P.T)
        P = normalize_P(P)
        if numerical_rank(P) != K0:
            continue
        B = _eigvecs_rows(P, K0)
        # rows must be distinct for the model to be identifiable
        if K == 1 or _min_pair_distance(B) > 1e-6:
            return P
    raise ModelError("could not draw an identifiable P")


def _eigvecs_rows(P: np.ndarray, K0: int) -> np.ndarray:
    w, V = np.linalg.eigh(P)
    order = np.argsort(-np.abs(w), kind="stable")[:K0]
    return V[:, order]


def _min_pair_distance(X: np.ndarray) -> float:
    d = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=-1)
    d[np.diag_indices_from(d)] = np.inf
    return float(d.min())
