"""Maximal lotteries, bipartisan sets, and clone expansions for one margin matrix.

A margin matrix is the payoff matrix of a symmetric zero-sum game; a
maximal lottery is a maximin mixed strategy, i.e. a distribution over
models that no opponent mixture beats in expectation. Because the matrix
is skew-symmetric the game value is zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lpcore
from .lpcore import SolverError, make_lp, solve_lp
from .prefdata import MarginMatrix

__all__ = [
    "SUPPORT_EPS",
    "CloneMap",
    "Lottery",
    "bipartisan_set",
    "condorcet_winner",
    "expand_clones",
    "lottery_to_json_dict",
    "maximal_lottery",
    "project_lottery",
]

SUPPORT_EPS = 1e-7


@dataclass(frozen=True)
class Lottery:
    """A probability vector over the roster with its achieved guarantee."""

    roster: tuple[str, ...]
    probs: np.ndarray
    value: float

    def __post_init__(self):
        object.__setattr__(self, "roster", tuple(self.roster))
        p = np.ascontiguousarray(self.probs, dtype=float)
        if p.shape != (len(self.roster),):
            raise ValueError("probability vector must match roster length")
        if np.any(p < -1e-9):
            raise ValueError(f"negative probability: {p.min()}")
        p = np.maximum(p, 0.0)
        if abs(float(p.sum()) - 1.0) > 1e-9:
            raise ValueError(f"probabilities must sum to 1, got {p.sum()!r}")
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.nonzero(self.probs > SUPPORT_EPS)[0])


@dataclass(frozen=True)
class CloneMap:
    """Bookkeeping for a clone expansion: which new id descends from which original."""

    original_roster: tuple[str, ...]
    expanded_roster: tuple[str, ...]
    parent: dict[str, str]

    def __post_init__(self):
        object.__setattr__(self, "original_roster", tuple(self.original_roster))
        object.__setattr__(self, "expanded_roster", tuple(self.expanded_roster))
        for mid in self.expanded_roster:
            if mid not in self.parent:
                raise ValueError(f"expanded id {mid!r} has no parent entry")
        for mid in self.original_roster:
            if self.parent.get(mid) != mid:
                raise ValueError(f"original id {mid!r} must map to itself")


def _game_lp(margins: np.ndarray) -> lpcore.LinearProgram:
    """max v s.t. (M^T p)_j >= v for all j, p on the simplex."""
    m = margins.shape[0]
    a_ub = np.zeros((m, m + 1))
    a_ub[:, m] = 1.0
    a_ub[:, :m] = -margins.T
    lower = np.zeros(m + 1)
    lower[m] = -np.inf
    obj = np.zeros(m + 1)
    obj[m] = 1.0
    eq = np.zeros((1, m + 1))
    eq[0, :m] = 1.0
    return make_lp(obj, a_eq=eq, b_eq=[1.0], a_ub=a_ub, b_ub=np.zeros(m), lower=lower)


def _canonical_order(margins: np.ndarray) -> np.ndarray:
    """Content-derived ordering of alternatives, invariant to relabeling.

    Sorting by the multiset of each row's margins makes the solve
    path, and therefore the returned vertex, identical across relabelings
    of the same game (up to the permutation). Ties fall back to input
    order.
    """
    keys = [tuple(np.sort(margins[i, :])) for i in range(margins.shape[0])]
    return np.array(sorted(range(len(keys)), key=lambda i: (keys[i], 0)), dtype=int)


def _solve_game(margins: np.ndarray) -> np.ndarray:
    order = _canonical_order(margins)
    canon = margins[np.ix_(order, order)]
    lp = _game_lp(canon)
    sol = solve_lp(lp)
    if sol.status != "OPTIMAL":
        raise SolverError(f"game solve returned {sol.status}", lp)
    p_canon = sol.point[: margins.shape[0]]
    p = np.empty_like(p_canon)
    p[order] = p_canon
    return p


def maximal_lottery(matrix: MarginMatrix) -> Lottery:
    """A maximin mixed strategy of the margin game.

    The returned lottery never loses in expectation to any opponent; its
    ``value`` is the worst margin against a pure opponent and sits at
    zero up to solver tolerance. When a strict Condorcet winner exists
    the unique answer is its point mass, returned exactly.
    """
    m = matrix.m
    winner = condorcet_winner(matrix, strict=True)
    if winner is not None:
        probs = np.zeros(m)
        probs[winner] = 1.0
        return Lottery(roster=matrix.roster, probs=probs, value=0.0)
    p = _solve_game(matrix.margins)
    guarantees = p @ matrix.margins
    value = float(np.min(guarantees))
    if value < -lpcore.FEAS_TOL * 100 or value > lpcore.FEAS_TOL * 100:
        raise SolverError(f"game value {value} is not zero within tolerance")
    return Lottery(roster=matrix.roster, probs=p, value=value)


def condorcet_winner(matrix: MarginMatrix, strict: bool = True) -> int | None:
    """Index of the alternative beating (or weakly beating) every other, if any.

    Strict mode requires a positive margin against every opponent and can
    never tie; non-strict mode accepts zero margins and breaks ties by
    lowest index.
    """
    margins = matrix.margins
    m = matrix.m
    for i in range(m):
        row = np.delete(margins[i, :], i)
        if strict:
            if np.all(row > 0):
                return i
        else:
            if np.all(row >= 0):
                return i
    return None


def bipartisan_set(matrix: MarginMatrix) -> set[int]:
    """Alternatives with positive probability in some maximal lottery.

    Because the game value is zero, the maximal lotteries are exactly the
    feasible set {p : p.M e_j >= 0 for all j}; maximizing each coordinate
    over that set decides membership.
    """
    m = matrix.m
    members: set[int] = set()
    a_ub = matrix.margins.T.copy()  # -(M^T p) <= 0  <=>  rows of M^T negated
    a_ub = -a_ub
    eq = np.ones((1, m))
    for i in range(m):
        obj = np.zeros(m)
        obj[i] = 1.0
        lp = make_lp(obj, a_eq=eq, b_eq=[1.0], a_ub=a_ub, b_ub=np.zeros(m))
        sol = solve_lp(lp)
        if sol.status != "OPTIMAL":
            raise SolverError(f"bipartisan membership LP returned {sol.status}", lp)
        if sol.value > SUPPORT_EPS:
            members.add(i)
    return members


def expand_clones(
    matrix: MarginMatrix,
    i: int,
    n_clones: int,
    handicaps,
) -> tuple[MarginMatrix, CloneMap]:
    """Append handicapped variants of alternative ``i``.

    Clone c loses every matchup by ``handicaps[c]`` relative to its
    parent: against original x the margin is M[i, x] - h_c, against the
    parent it is -h_c, and clone-vs-clone margins are the handicap
    differences. Raises if any resulting entry leaves [-1, 1]; callers
    must shrink the handicap instead of clamping.
    """
    if not 0 <= i < matrix.m:
        raise ValueError(f"parent index {i} out of range")
    h = np.asarray(handicaps, dtype=float)
    if h.shape != (n_clones,):
        raise ValueError(f"expected {n_clones} handicaps, got shape {h.shape}")
    if np.any(h < 0):
        raise ValueError("handicaps must be nonnegative")

    m = matrix.m
    parent_id = matrix.roster[i]
    clone_ids = tuple(f"{parent_id}~clone{t + 1}" for t in range(n_clones))
    if set(clone_ids) & set(matrix.roster):
        raise ValueError("clone id collides with an existing model id")
    total = m + n_clones

    expanded = np.zeros((total, total))
    expanded[:m, :m] = matrix.margins
    for c in range(n_clones):
        row = m + c
        for x in range(m):
            val = (matrix.margins[i, x] - h[c]) if x != i else -h[c]
            expanded[row, x] = val
            expanded[x, row] = -val
        for c2 in range(n_clones):
            expanded[row, m + c2] = h[c2] - h[c]
    if np.max(np.abs(expanded)) > 1.0:
        raise ValueError("handicap pushes a margin outside [-1, 1]; shrink it")

    counts = np.zeros((total, total))
    counts[:m, :m] = matrix.counts
    expanded_roster = matrix.roster + clone_ids
    parent = {mid: mid for mid in matrix.roster}
    parent.update({cid: parent_id for cid in clone_ids})
    clone_map = CloneMap(matrix.roster, expanded_roster, parent)
    return MarginMatrix(roster=expanded_roster, margins=expanded, counts=counts), clone_map


def project_lottery(expanded: Lottery, clone_map: CloneMap) -> Lottery:
    """Fold clone mass back onto each clone's parent."""
    if expanded.roster != clone_map.expanded_roster:
        raise ValueError("lottery roster does not match the clone map")
    index = {mid: j for j, mid in enumerate(clone_map.original_roster)}
    probs = np.zeros(len(clone_map.original_roster))
    for mid, mass in zip(expanded.roster, expanded.probs):
        probs[index[clone_map.parent[mid]]] += mass
    return Lottery(roster=clone_map.original_roster, probs=probs, value=expanded.value)


def lottery_to_json_dict(lottery: Lottery) -> dict:
    return {
        "roster": list(lottery.roster),
        "probs": [float(p) for p in lottery.probs],
        "value": float(lottery.value),
        "support": list(lottery.support),
    }
