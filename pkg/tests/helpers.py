"""Shared generators and brute-force oracles for the test suite."""
import itertools

import numpy as np

from dfm.model import ModelSpec, random_connectivity
from dfm.sampling import sample_labels


def random_spec(rng, K=None, K0=None, n=None, rho=None, nonnegative=False):
    """A random valid model with K in {2, 3, 5}, K0 in {K-1, K}, n in [30, 200]."""
    K = int(rng.choice([2, 3, 5])) if K is None else K
    K0 = int(rng.choice([K - 1, K])) if K0 is None else K0
    n = int(rng.integers(30, 201)) if n is None else n
    rho = float(rng.uniform(0.1, 2.0)) if rho is None else rho
    P = random_connectivity(K, K0, rng, nonnegative=nonnegative)
    labels = sample_labels(n, K, rng)
    return ModelSpec.from_labels(labels, P, rho, K0)


def one_hot(labels, K):
    Z = np.zeros((len(labels), K), dtype=int)
    Z[np.arange(len(labels)), labels] = 1
    return Z


def brute_hamming_l0(truth, est, K):
    """min over K x K permutation matrices J of ||Zhat J - Z||_0."""
    Z, Zhat = one_hot(truth, K), one_hot(est, K)
    best = None
    for perm in itertools.permutations(range(K)):
        J = np.eye(K, dtype=int)[list(perm)]
        val = int(np.count_nonzero(Zhat @ J - Z))
        best = val if best is None else min(best, val)
    return best


def brute_fhat(truth, est, K):
    n = len(truth)
    C = [set(i for i in range(n) if truth[i] == k) for k in range(K)]
    Ch = [set(i for i in range(n) if est[i] == k) for k in range(K)]
    best = np.inf
    for pi in itertools.permutations(range(K)):
        worst = max((len(C[k] - Ch[pi[k]]) + len(Ch[pi[k]] - C[k])) / len(C[k]) for k in range(K))
        best = min(best, worst)
    return best


def jacobi_eigenvalues(S, sweeps=100, tol=1e-14):
    """Cyclic Jacobi rotations in plain Python; independent of LAPACK."""
    a = [list(map(float, row)) for row in S]
    n = len(a)
    for _ in range(sweeps):
        off = sum(a[i][j] ** 2 for i in range(n) for j in range(n) if i != j)
        if off < tol ** 2:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p][q]) < 1e-300:
                    continue
                theta = (a[q][q] - a[p][p]) / (2 * a[p][q])
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + (theta * theta + 1) ** 0.5)
                c = 1 / (t * t + 1) ** 0.5
                s = t * c
                for k in range(n):
                    akp, akq = a[k][p], a[k][q]
                    a[k][p] = c * akp - s * akq
                    a[k][q] = s * akp + c * akq
                for k in range(n):
                    apk, aqk = a[p][k], a[q][k]
                    a[p][k] = c * apk - s * aqk
                    a[q][k] = s * apk + c * aqk
    return [a[i][i] for i in range(n)]


def spearman(x, y):
    from scipy.stats import spearmanr
    return float(spearmanr(x, y)[0])
