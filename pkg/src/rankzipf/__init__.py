"""Rank-frequency laws for words typed by a memoryless source.

Exact enumeration of the sorted word list, the power exponent and limit
constants, the continuous approximation, and convergence experiments.
"""

from .enumeration import (
    CompositionClass,
    EnumeratorState,
    NormalizedModel,
    RankAnswer,
    multinomial,
    next_class,
    normalize_model,
    probability_to_rank,
    q_tilde,
    q_tilde_grid,
    rank_to_probability,
    verify_functional_equation,
    word_at_rank,
)
from .errors import (
    BudgetExceeded,
    DomainError,
    NotLattice,
    ParseError,
    RankZipfError,
    SingularMatrix,
    ValidationError,
)
from .model import (
    Alphabet,
    GammaSolution,
    LatticeReport,
    PredictedLimits,
    build_alphabet,
    cross_entropy,
    detect_lattice,
    entropy,
    kl_divergence,
    predicted_limits,
    solve_gamma,
)

__version__ = "0.1.0"
