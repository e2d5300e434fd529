"""Distribution-free block models for weighted networks.

Edges may follow any distribution whose mean is rho * Z P Z'. Communities
are recovered from the top-K0 eigenvectors of the observed adjacency
matrix followed by k-means.
"""
from .evaluation import (delta_separation, f_hat, hamming_error, hamming_l0, sigma_lower_bound_check,
                         spectral_deviation, theoretical_rate)
from .model import (ModelError, ModelSpec, build_omega, canonical_index_set, community_sizes,
                    labels_to_membership, membership_to_labels, normalize_P)
from .sampling import (DomainError, EdgeDistribution, NoiseSpec, RandomStream, check_assumptions,
                       observe, sample_adjacency, sample_labels, sample_noise)
from .spectral import KMeansConfig, dfa, ideal_dfa, kmeans, top_eigs

__version__ = "0.1.0"
