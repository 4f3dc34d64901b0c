"""Default tolerances, in one place so every report can echo them."""

DEFAULT_TOLERANCES = {
    # eigenvalue clustering
    "cluster_abs": 1e-10,
    "cluster_rel": 1e-8,
    # hermiticity precondition, relative to 1 + ||M||_F
    "hermitian": 1e-10,
    # probabilities below this are exact zeros before conditioning
    "zero_probability": 1e-14,
    # statistical equivalence / pushforward identities
    "equivalence": 1e-10,
    # commutator test for compatibility, relative to 1 + ||A|| ||B||
    "commutator": 1e-9,
    # rank counting for purity checks
    "rank": 1e-8,
    # algebraic identities in the commutative engine
    "algebra": 1e-9,
    # auditor default
    "audit": 1e-8,
    # LP marginal matching
    "lp": 1e-9,
}

DEFAULT_PROBE_MIXTURES = 64
DEFAULT_MAX_SEQUENCE = 3
DEFAULT_LP_CAP = 10**6
