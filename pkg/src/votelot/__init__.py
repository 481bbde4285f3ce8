"""votelot: maximal lotteries and distributionally robust lotteries from pairwise votes."""

from .evalharness import (
    FrontierPoint,
    RegretSample,
    SweepPoint,
    SynthConfig,
    cost_frontier,
    generalization_gap,
    planted_margins,
    regret_simulation,
    sweep_rho,
    synth_generate,
)
from .lottery import (
    SUPPORT_EPS,
    CloneMap,
    Lottery,
    bipartisan_set,
    condorcet_winner,
    expand_clones,
    maximal_lottery,
    project_lottery,
)
from .lpcore import (
    LinearProgram,
    LpSolution,
    SolverError,
    check_solution,
    lp_to_text,
    make_lp,
    solve_lp,
)
from .prefdata import (
    GroupMargins,
    MarginMatrix,
    MixtureWeights,
    Outcome,
    VoteParseError,
    VoteRecord,
    VoteTable,
    bootstrap_resample,
    build_margins,
    empirical_weights,
    parse_votes,
    pooled_matrix,
    reversal_rate,
    split,
    win_rate,
)
from .robust import (
    AmbiguitySet,
    InfeasibleConstraintsError,
    LinearConstraint,
    RobustSolveReport,
    SparsifyError,
    TvBall,
    VertexHull,
    inner_min_value,
    mixture_ambiguity,
    rho_from_data,
    robust_bipartisan_set,
    robust_condorcet_winner,
    robust_dominated,
    robust_lottery,
    small_radius_threshold,
    sparsify,
    tv_ball_vertices,
)

__version__ = "0.1.0"
