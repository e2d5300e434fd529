"""Top-K0 eigendecomposition, k-means and the spectral community detector."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sampling import RandomStream

SYM_RTOL = 1e-10


class SpectralError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralPair:
    U: np.ndarray
    eigenvalues: np.ndarray


def check_symmetric(S: np.ndarray, rtol: float = SYM_RTOL) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    scale = np.max(np.abs(S)) if S.size else 0.0
    if np.max(np.abs(S - S.T), initial=0.0) > rtol * max(scale, 1.0):
        raise ValueError("matrix is not symmetric")
    return S


def top_eigs(S, K0: int) -> SpectralPair:
    """Eigenpairs of the K0 largest-magnitude eigenvalues of a symmetric matrix.

    Eigenvalues come out sorted by decreasing |lambda|; ties go to the larger
    signed value, then to the lower position in LAPACK's ascending order.
    Eigenvector signs are not normalized.
    """
    S = check_symmetric(S)
    n = S.shape[0]
    if not 1 <= K0 <= n:
        raise ValueError(f"K0={K0} outside [1, {n}]")
    try:
        w, V = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"eigendecomposition did not converge: {exc}") from exc
    order = np.lexsort((np.arange(n), -w, -np.abs(w)))[:K0]
    return SpectralPair(U=V[:, order], eigenvalues=w[order])


def spectral_norm(M) -> float:
    """Largest singular value of a symmetric matrix (max |eigenvalue|)."""
    M = check_symmetric(M)
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(M))))


@dataclass(frozen=True)
class KMeansConfig:
    restarts: int = 10
    max_iter: int = 100
    tol: float = 1e-8
    rng: RandomStream = field(default_factory=lambda: RandomStream(0))

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")


@dataclass(frozen=True)
class ClusteringResult:
    labels: np.ndarray
    centers: np.ndarray
    wcss: float
    degenerate: bool = False
    n_iter: int = 0
    history: tuple[float, ...] = ()


def _sqdist(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - C[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _plusplus(X: np.ndarray, K: int, gen: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    idx = [int(gen.integers(n))]
    d2 = _sqdist(X, X[idx]).min(axis=1)
    for _ in range(1, K):
        total = d2.sum()
        if total > 0:
            nxt = int(gen.choice(n, p=d2 / total))
        else:
            nxt = int(gen.integers(n))
        idx.append(nxt)
        d2 = np.minimum(d2, _sqdist(X, X[nxt:nxt + 1])[:, 0])
    return X[idx].copy()


def _lloyd(X: np.ndarray, C: np.ndarray, max_iter: int, tol: float):
    K = C.shape[0]
    history = []
    labels = None
    it = 0
    for it in range(1, max_iter + 1):
        D = _sqdist(X, C)
        new = np.argmin(D, axis=1)
        counts = np.bincount(new, minlength=K)
        # empty clusters take the point farthest from its own center
        for k in np.flatnonzero(counts == 0):
            own = D[np.arange(X.shape[0]), new]
            far = int(np.argmax(own))
            if own[far] <= 0:
                break
            C[k] = X[far]
            D = _sqdist(X, C)
            new = np.argmin(D, axis=1)
            counts = np.bincount(new, minlength=K)
        history.append(float(D[np.arange(X.shape[0]), new].sum()))
        C_new = C.copy()
        for k in np.flatnonzero(counts > 0):
            C_new[k] = X[new == k].mean(axis=0)
        shift = float(np.max(np.sum((C_new - C) ** 2, axis=1)))
        C = C_new
        stable = labels is not None and np.array_equal(new, labels)
        labels = new
        if stable or shift <= tol:
            break
    D = _sqdist(X, C)
    labels = np.argmin(D, axis=1)
    wcss = float(D[np.arange(X.shape[0]), labels].sum())
    history.append(wcss)
    return labels, C, wcss, it, history


def kmeans(rows, K: int, config: KMeansConfig | None = None) -> ClusteringResult:
    """Lloyd's algorithm from k-means++ seeds; the restart with the lowest
    within-cluster sum of squares wins (ties go to the earlier restart)."""
    config = config or KMeansConfig()
    X = np.asarray(rows, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if not 1 <= K <= n:
        raise ValueError(f"need 1 <= K <= n, got K={K}, n={n}")
    distinct = np.unique(X, axis=0).shape[0]
    best = None
    for r in range(config.restarts):
        gen = config.rng.child(r).generator()
        C = _plusplus(X, K, gen)
        labels, C, wcss, it, hist = _lloyd(X, C, config.max_iter, config.tol)
        if best is None or wcss < best[2]:
            best = (labels, C, wcss, it, hist)
    labels, C, wcss, it, hist = best
    return ClusteringResult(labels=labels.astype(int), centers=C, wcss=wcss,
                            degenerate=distinct < K, n_iter=it, history=tuple(hist))


def dfa(Ahat, K: int, K0: int, config: KMeansConfig | None = None) -> np.ndarray:
    """Estimate 0-based community labels from an observed adjacency matrix.

    Rows of the top-K0 eigenvector matrix are clustered into K groups.
    """
    Ahat = np.asarray(Ahat, dtype=float)
    if not 1 <= K0 <= K <= Ahat.shape[0]:
        raise ValueError(f"need 1 <= K0 <= K <= n, got K0={K0}, K={K}, n={Ahat.shape[0]}")
    U = top_eigs(Ahat, K0).U
    return kmeans(U, K, config).labels


def ideal_dfa(Omega, K: int, K0: int, config: KMeansConfig | None = None) -> np.ndarray:
    return dfa(Omega, K, K0, config)
