"""Robust lotteries: worst-case maximin strategies over a set of margin matrices.

An ambiguity set is either a total-variation ball around a reference
mixture of group matrices, or an explicit finite hull of matrices. The
robust value of a lottery is its worst game value over the set; a robust
lottery maximizes it. The TV-ball optimization runs as a single linear
program obtained by dualizing the inner minimization over mixture
weights, so its size stays O(m K).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import lpcore
from .lpcore import SolverError, make_lp, solve_lp
from .lottery import SUPPORT_EPS, Lottery
from .prefdata import GroupMargins, MarginMatrix, MixtureWeights
from .seeds import substream

__all__ = [
    "AmbiguitySet",
    "InfeasibleConstraintsError",
    "LinearConstraint",
    "RobustSolveReport",
    "SparsifyError",
    "TvBall",
    "VertexHull",
    "inner_min_value",
    "mixture_ambiguity",
    "report_to_json_dict",
    "rho_from_data",
    "robust_bipartisan_set",
    "robust_condorcet_winner",
    "robust_dominated",
    "robust_lottery",
    "small_radius_threshold",
    "sparsify",
    "tv_ball_vertices",
]

_TOL = lpcore.FEAS_TOL
_BIPARTISAN_SLACK = 1e-8


class InfeasibleConstraintsError(RuntimeError):
    """The requested lottery constraints admit no distribution."""


class SparsifyError(RuntimeError):
    """No sampled sparse lottery reached the target value; carries the best found."""

    def __init__(self, message: str, best_value: float):
        super().__init__(message)
        self.best_value = best_value


@dataclass(frozen=True)
class TvBall:
    """Pooled matrices M(w) for every mixture w within TV distance radius of center."""

    margins: GroupMargins
    center: MixtureWeights
    radius: float

    def __post_init__(self):
        if len(self.center) != self.margins.k:
            raise ValueError("center weight vector must have one entry per group")
        if not 0.0 <= self.radius <= 1.0:
            raise ValueError(f"radius must lie in [0, 1], got {self.radius}")

    @property
    def roster(self) -> tuple[str, ...]:
        return self.margins.roster


@dataclass(frozen=True)
class VertexHull:
    """The convex hull of an explicit list of margin matrices."""

    matrices: tuple[MarginMatrix, ...]

    def __post_init__(self):
        object.__setattr__(self, "matrices", tuple(self.matrices))
        if not self.matrices:
            raise ValueError("vertex hull needs at least one matrix")
        roster = self.matrices[0].roster
        for mat in self.matrices:
            if mat.roster != roster:
                raise ValueError("all hull matrices must share a roster")

    @property
    def roster(self) -> tuple[str, ...]:
        return self.matrices[0].roster

    def stacked(self) -> np.ndarray:
        return np.stack([m.margins for m in self.matrices])


AmbiguitySet = Union[TvBall, VertexHull]


@dataclass(frozen=True)
class RobustSolveReport:
    """Robust lottery plus the dual certificate of the TV program.

    ``mu``/``lam``/``gamma`` are None for vertex-hull solves, which have
    no mixture-weight dual. ``active_alternatives`` are the opponents
    whose worst-case constraint is tight at the optimum.
    """

    lottery: Lottery
    robust_value: float
    mu: np.ndarray | None
    lam: np.ndarray | None
    gamma: np.ndarray | None
    active_alternatives: tuple[int, ...]

    def __post_init__(self):
        if self.robust_value > 100 * _TOL:
            raise SolverError(f"robust value {self.robust_value} above zero; solver inconsistency")


@dataclass(frozen=True)
class LinearConstraint:
    """coeffs . p <= bound, an extra restriction on the lottery."""

    coeffs: np.ndarray
    bound: float

    def __post_init__(self):
        c = np.ascontiguousarray(self.coeffs, dtype=float)
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)


def small_radius_threshold(center: MixtureWeights) -> float:
    """Largest radius at which every single-coordinate shift stays in the simplex."""
    w = center.weights
    return float(min(w.min(), 1.0 - w.max()))


def _tv_linear_min(c: np.ndarray, w0: np.ndarray, rho: float) -> float:
    """min of w.c over the TV ball around w0.

    Below the small-radius threshold the minimum moves rho of mass from
    the largest coefficient to the smallest, giving a closed form;
    otherwise the small LP over (w, slack) decides it.
    """
    if c.shape[0] == 1:
        return float(c[0])
    rho0 = float(min(w0.min(), 1.0 - w0.max()))
    if rho <= rho0:
        return float(w0 @ c - rho * (c.max() - c.min()))
    return _tv_linear_min_lp(c, w0, rho)


def _tv_linear_min_lp(c: np.ndarray, w0: np.ndarray, rho: float) -> float:
    k = c.shape[0]
    # vars: w(k), s(k); maximize -c.w
    obj = np.concatenate([-c, np.zeros(k)])
    eye = np.eye(k)
    a_ub = np.block([[eye, -eye], [-eye, -eye], [np.zeros((1, k)), np.ones((1, k))]])
    b_ub = np.concatenate([w0, -w0, [2.0 * rho]])
    a_eq = np.concatenate([np.ones(k), np.zeros(k)])[None, :]
    lp = make_lp(obj, a_eq=a_eq, b_eq=[1.0], a_ub=a_ub, b_ub=b_ub)
    sol = solve_lp(lp)
    if sol.status != "OPTIMAL":
        raise SolverError(f"TV inner minimization returned {sol.status}", lp)
    return -sol.value


def _tv_inner_values(stack: np.ndarray, w0: np.ndarray, rho: float, p: np.ndarray) -> np.ndarray:
    """Worst mixture value per pure opponent: min_w p.M(w).e_a for each a."""
    coeff = np.einsum("i,kia->ka", p, stack)  # coeff[k, a] = p.M^(k).e_a
    rho0 = float(min(w0.min(), 1.0 - w0.max()))
    if stack.shape[0] == 1:
        return coeff[0]
    if rho <= rho0:
        return w0 @ coeff - rho * (coeff.max(axis=0) - coeff.min(axis=0))
    return np.array([_tv_linear_min_lp(coeff[:, a], w0, rho) for a in range(stack.shape[1])])


def inner_min_value(p, amb: AmbiguitySet) -> float:
    """The robust value of a lottery: its worst game value over the ambiguity set."""
    probs = np.asarray(getattr(p, "probs", p), dtype=float)
    roster = getattr(p, "roster", None)
    if roster is not None and tuple(roster) != amb.roster:
        raise ValueError("lottery roster does not match the ambiguity set")
    m = len(amb.roster)
    if probs.shape != (m,):
        raise ValueError(f"lottery has {probs.shape[0]} entries, roster has {m}")
    if isinstance(amb, VertexHull):
        stack = amb.stacked()
        values = np.einsum("i,kia->ka", probs, stack)
        return float(values.min())
    values = _tv_inner_values(amb.margins.stacked(), amb.center.weights, amb.radius, probs)
    return float(values.min())


def _entry_extrema_tv(stack: np.ndarray, w0: np.ndarray, rho: float) -> tuple[np.ndarray, np.ndarray]:
    """Entrywise (min, max) of M(w) over the TV ball. Exact below the threshold,
    otherwise valid bounds refined lazily by callers."""
    fbar = np.tensordot(w0, stack, axes=1)
    spread = stack.max(axis=0) - stack.min(axis=0)
    return fbar - rho * spread, fbar + rho * spread


def _entry_min(amb: AmbiguitySet, i: int, j: int) -> float:
    if isinstance(amb, VertexHull):
        return float(min(mat.margins[i, j] for mat in amb.matrices))
    stack = amb.margins.stacked()
    return _tv_linear_min(stack[:, i, j], amb.center.weights, amb.radius)


def _entry_max(amb: AmbiguitySet, i: int, j: int) -> float:
    if isinstance(amb, VertexHull):
        return float(max(mat.margins[i, j] for mat in amb.matrices))
    stack = amb.margins.stacked()
    return -_tv_linear_min(-stack[:, i, j], amb.center.weights, amb.radius)


def robust_condorcet_winner(amb: AmbiguitySet, strict: bool = True) -> int | None:
    """Alternative with nonnegative margin against everyone in every matrix.

    Strict mode additionally needs, for each opponent, some matrix in the
    set where the margin is strictly positive. Non-strict ties break to
    the lowest index.
    """
    m = len(amb.roster)
    if isinstance(amb, VertexHull):
        stack = amb.stacked()
        entry_min = stack.min(axis=0)
        entry_max = stack.max(axis=0)
        exact = True
        center = None
    else:
        entry_min, entry_max = _entry_extrema_tv(
            amb.margins.stacked(), amb.center.weights, amb.radius
        )
        rho0 = small_radius_threshold(amb.center)
        exact = amb.radius <= rho0 or amb.margins.k == 1
        center = np.tensordot(amb.center.weights, amb.margins.stacked(), axes=1)

    for i in range(m):
        row_min = np.delete(entry_min[i, :], i)
        row_max = np.delete(entry_max[i, :], i)
        cols = np.delete(np.arange(m), i)
        if not exact:
            # entry_min is only a lower bound here; a nonnegative center row
            # is necessary, and the survivors get the exact per-entry minima
            if np.any(center[i, cols] < -_TOL):
                continue
            row_min = np.array([_entry_min(amb, i, int(j)) for j in cols])
            row_max = np.array([_entry_max(amb, i, int(j)) for j in cols])
        if np.any(row_min < -_TOL):
            continue
        if strict and not np.all(row_max > _TOL):
            continue
        return i
    return None


def robust_dominated(amb: AmbiguitySet) -> set[int]:
    """Alternatives strictly beaten by someone against every opponent in every matrix."""
    m = len(amb.roster)
    if isinstance(amb, VertexHull):
        stack = amb.stacked()
        exact = True
    else:
        stack = amb.margins.stacked()
        rho0 = small_radius_threshold(amb.center)
        exact = amb.radius <= rho0 or amb.margins.k == 1

    dominated: set[int] = set()
    for y in range(m):
        for x in range(m):
            if x == y:
                continue
            diff = stack[:, x, :] - stack[:, y, :]  # (K, m)
            if isinstance(amb, VertexHull):
                worst = float(diff.min())
            else:
                w0 = amb.center.weights
                fbar = w0 @ diff
                lower = fbar - amb.radius * (diff.max(axis=0) - diff.min(axis=0))
                if exact:
                    worst = float(lower.min())
                elif np.any(fbar <= _TOL):
                    worst = float(min(fbar.min(), 0.0))
                else:
                    worst = min(
                        _tv_linear_min(diff[:, j], w0, amb.radius) for j in range(m)
                    )
            if worst > _TOL:
                dominated.add(y)
                break
    return dominated


def _canonical_orders(stack: np.ndarray, w0: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
    """Content-derived orderings of alternatives and matrices.

    Relabeling alternatives or groups permutes matrix entries without
    changing their values, so sorting by entry content rebuilds the same
    LP byte for byte and keeps the solver permutation-equivariant.
    """
    n_mat, m, _ = stack.shape
    weights = np.ones(n_mat) if w0 is None else w0
    alt_keys = []
    for i in range(m):
        per_mat = sorted(
            (float(weights[k]), tuple(np.sort(stack[k, i, :]))) for k in range(n_mat)
        )
        alt_keys.append(tuple(per_mat))
    alt_order = np.array(sorted(range(m), key=lambda i: alt_keys[i]), dtype=int)
    canon = stack[:, alt_order][:, :, alt_order]
    mat_keys = [(float(weights[k]), canon[k].tobytes()) for k in range(n_mat)]
    mat_order = np.array(sorted(range(n_mat), key=lambda k: mat_keys[k]), dtype=int)
    return alt_order, mat_order


def _tv_dual_lp(
    stack: np.ndarray,
    w0: np.ndarray,
    rho: float,
    extra: Sequence[LinearConstraint],
) -> lpcore.LinearProgram:
    """The O(mK) linear program for the TV-ball robust lottery.

    Variables are (p, t, mu, lam, gamma); t is the robust value, and per
    opponent the (mu, lam, gamma) block is the dual certificate of the
    inner minimization over mixture weights.
    """
    k, m, _ = stack.shape
    n_vars = m + 1 + m + m + m * k
    t_i = m
    mu_i = m + 1
    lam_i = mu_i + m
    g_i = lam_i + m

    n_rows = m + 3 * m * k + len(extra)
    a_ub = np.zeros((n_rows, n_vars))
    b_ub = np.zeros(n_rows)
    r = 0
    for a in range(m):
        a_ub[r, t_i] = 1.0
        a_ub[r, mu_i + a] = -1.0
        a_ub[r, lam_i + a] = 2.0 * rho
        a_ub[r, g_i + a * k : g_i + (a + 1) * k] = -w0
        r += 1
    for a in range(m):
        cols = -stack[:, :, a]  # cols[j_group, i_model] = -M^(k)[i, a]
        for kk in range(k):
            a_ub[r, mu_i + a] = 1.0
            a_ub[r, g_i + a * k + kk] = 1.0
            a_ub[r, :m] = cols[kk]
            r += 1
    for a in range(m):
        for kk in range(k):
            a_ub[r, g_i + a * k + kk] = 1.0
            a_ub[r, lam_i + a] = -1.0
            r += 1
            a_ub[r, g_i + a * k + kk] = -1.0
            a_ub[r, lam_i + a] = -1.0
            r += 1
    for con in extra:
        a_ub[r, :m] = con.coeffs
        b_ub[r] = con.bound
        r += 1

    lower = np.full(n_vars, -np.inf)
    lower[:m] = 0.0
    lower[lam_i : lam_i + m] = 0.0
    obj = np.zeros(n_vars)
    obj[t_i] = 1.0
    a_eq = np.zeros((1, n_vars))
    a_eq[0, :m] = 1.0
    return make_lp(obj, a_eq=a_eq, b_eq=[1.0], a_ub=a_ub, b_ub=b_ub, lower=lower)


def _hull_lp(stack: np.ndarray, extra: Sequence[LinearConstraint]) -> lpcore.LinearProgram:
    """max t s.t. t <= p.M^(v).e_a for every hull vertex and opponent."""
    n_mat, m, _ = stack.shape
    n_vars = m + 1
    rows = []
    for v in range(n_mat):
        block = np.zeros((m, n_vars))
        block[:, m] = 1.0
        block[:, :m] = -stack[v].T
        rows.append(block)
    a_ub = np.vstack(rows)
    b_ub = np.zeros(a_ub.shape[0])
    if extra:
        pad = np.zeros((len(extra), n_vars))
        for i, con in enumerate(extra):
            pad[i, :m] = con.coeffs
        a_ub = np.vstack([a_ub, pad])
        b_ub = np.concatenate([b_ub, [con.bound for con in extra]])
    lower = np.full(n_vars, -np.inf)
    lower[:m] = 0.0
    obj = np.zeros(n_vars)
    obj[m] = 1.0
    a_eq = np.zeros((1, n_vars))
    a_eq[0, :m] = 1.0
    return make_lp(obj, a_eq=a_eq, b_eq=[1.0], a_ub=a_ub, b_ub=b_ub, lower=lower)


def robust_lottery(
    amb: AmbiguitySet,
    extra_constraints: Sequence[LinearConstraint] = (),
) -> RobustSolveReport:
    """Maximize the worst-case game value over the ambiguity set.

    TV balls go through the dual linear program; vertex hulls get one
    constraint per (vertex, opponent). Optional linear constraints on the
    lottery (an expected-cost budget, say) are appended verbatim. A
    strict robust Condorcet winner short-circuits to its point mass,
    which is the unique optimum.
    """
    roster = amb.roster
    m = len(roster)

    if not extra_constraints:
        winner = robust_condorcet_winner(amb, strict=True)
        if winner is not None:
            probs = np.zeros(m)
            probs[winner] = 1.0
            lottery = Lottery(roster=roster, probs=probs, value=float(inner_min_value(probs, amb)))
            return RobustSolveReport(
                lottery=lottery,
                robust_value=0.0,
                mu=None,
                lam=None,
                gamma=None,
                active_alternatives=(winner,),
            )

    if isinstance(amb, TvBall):
        stack = amb.margins.stacked()
        w0 = amb.center.weights
        alt_order, grp_order = _canonical_orders(stack, w0)
        stack_c = stack[np.ix_(grp_order, alt_order, alt_order)]
        w0_c = w0[grp_order]
        extra_c = [
            LinearConstraint(np.asarray(con.coeffs, dtype=float)[alt_order], con.bound)
            for con in extra_constraints
        ]
        lp = _tv_dual_lp(stack_c, w0_c, amb.radius, extra_c)
        sol = solve_lp(lp)
        if sol.status == "INFEASIBLE":
            raise InfeasibleConstraintsError("no lottery satisfies the extra constraints")
        if sol.status != "OPTIMAL":
            raise SolverError(f"robust lottery LP returned {sol.status}", lp)
        k = stack.shape[0]
        x = sol.point
        p = np.empty(m)
        p[alt_order] = x[:m]
        t = float(x[m])
        mu = np.empty(m)
        mu[alt_order] = x[m + 1 : 2 * m + 1]
        lam = np.empty(m)
        lam[alt_order] = x[2 * m + 1 : 3 * m + 1]
        gamma_c = x[3 * m + 1 :].reshape(m, k)
        gamma = np.empty((m, k))
        gamma[np.ix_(alt_order, grp_order)] = gamma_c
        slack = mu - 2.0 * amb.radius * lam + gamma @ w0 - t
        active = tuple(int(a) for a in np.nonzero(slack <= 1e-7)[0])
        lottery = Lottery(roster=roster, probs=p, value=float(inner_min_value(p, amb)))
        _check_self_consistency(t, lottery.value)
        return RobustSolveReport(
            lottery=lottery,
            robust_value=t,
            mu=mu,
            lam=lam,
            gamma=gamma,
            active_alternatives=active,
        )

    stack = amb.stacked()
    alt_order, mat_order = _canonical_orders(stack, None)
    stack_c = stack[np.ix_(mat_order, alt_order, alt_order)]
    extra_c = [
        LinearConstraint(np.asarray(con.coeffs, dtype=float)[alt_order], con.bound)
        for con in extra_constraints
    ]
    lp = _hull_lp(stack_c, extra_c)
    sol = solve_lp(lp)
    if sol.status == "INFEASIBLE":
        raise InfeasibleConstraintsError("no lottery satisfies the extra constraints")
    if sol.status != "OPTIMAL":
        raise SolverError(f"robust lottery LP returned {sol.status}", lp)
    p = np.empty(m)
    p[alt_order] = sol.point[:m]
    t = float(sol.point[m])
    per_pair = np.einsum("i,kia->ka", p, stack)
    active = tuple(int(a) for a in np.nonzero(per_pair.min(axis=0) <= t + 1e-7)[0])
    lottery = Lottery(roster=roster, probs=p, value=float(inner_min_value(p, amb)))
    _check_self_consistency(t, lottery.value)
    return RobustSolveReport(
        lottery=lottery,
        robust_value=t,
        mu=None,
        lam=None,
        gamma=None,
        active_alternatives=active,
    )


def _check_self_consistency(lp_value: float, recomputed: float) -> None:
    if abs(lp_value - recomputed) > 1e-6:
        raise SolverError(
            f"robust value {lp_value} disagrees with direct evaluation {recomputed}"
        )


def _feasibility_rows(amb: AmbiguitySet, floor: float):
    """Constraint system of robust_lottery plus 't >= floor', sharing its layout."""
    if isinstance(amb, TvBall):
        stack = amb.margins.stacked()
        lp = _tv_dual_lp(stack, amb.center.weights, amb.radius, ())
    else:
        lp = _hull_lp(amb.stacked(), ())
    m = len(amb.roster)
    n_vars = lp.n_vars
    t_row = np.zeros((1, n_vars))
    t_row[0, m] = -1.0
    a_ub = np.vstack([lp.a_ub, t_row])
    b_ub = np.concatenate([lp.b_ub, [-floor]])
    return lp, a_ub, b_ub


def robust_bipartisan_set(amb: AmbiguitySet) -> set[int]:
    """Alternatives with positive probability in some robust lottery.

    The robust lotteries form a convex set, so maximizing each coordinate
    over near-optimal feasible points decides membership. Two exact
    shortcuts keep the slack in "near-optimal" from leaking mass where
    none can be: a strict robust Condorcet winner is the unique robust
    lottery, and uniformly dominated alternatives never carry weight.
    """
    winner = robust_condorcet_winner(amb, strict=True)
    if winner is not None:
        return {winner}
    excluded = robust_dominated(amb)
    base = robust_lottery(amb)
    floor = base.robust_value - _BIPARTISAN_SLACK
    lp, a_ub, b_ub = _feasibility_rows(amb, floor)
    m = len(amb.roster)
    members: set[int] = set()
    for i in range(m):
        if i in excluded:
            continue
        obj = np.zeros(lp.n_vars)
        obj[i] = 1.0
        probe = make_lp(
            obj, a_eq=lp.a_eq, b_eq=lp.b_eq, a_ub=a_ub, b_ub=b_ub, lower=lp.lower, upper=lp.upper
        )
        sol = solve_lp(probe)
        if sol.status != "OPTIMAL":
            raise SolverError(f"bipartisan probe returned {sol.status}", probe)
        if sol.value > SUPPORT_EPS:
            members.add(i)
    return members


def worst_case_certificate(p, amb: AmbiguitySet) -> tuple[int, np.ndarray]:
    """The binding opponent and one matrix/mixture attaining the robust value.

    For TV balls the returned vector is the minimizing mixture weight (one
    of possibly many); for vertex hulls it is the index of the minimizing
    vertex encoded as a one-hot vector over the hull's matrices.
    """
    probs = np.asarray(getattr(p, "probs", p), dtype=float)
    if isinstance(amb, VertexHull):
        stack = amb.stacked()
        values = np.einsum("i,kia->ka", probs, stack)
        vertex, opponent = np.unravel_index(np.argmin(values), values.shape)
        onehot = np.zeros(len(amb.matrices))
        onehot[vertex] = 1.0
        return int(opponent), onehot

    stack = amb.margins.stacked()
    w0 = amb.center.weights
    values = _tv_inner_values(stack, w0, amb.radius, probs)
    opponent = int(np.argmin(values))
    coeff = np.einsum("i,ki->k", probs, stack[:, :, opponent])
    k = stack.shape[0]
    if k == 1:
        return opponent, w0.copy()
    rho0 = float(min(w0.min(), 1.0 - w0.max()))
    if amb.radius <= rho0:
        w = w0.copy()
        w[int(np.argmax(coeff))] -= amb.radius
        w[int(np.argmin(coeff))] += amb.radius
        return opponent, w
    # beyond the closed-form regime, read the mixture off the inner LP
    eye = np.eye(k)
    a_ub = np.block([[eye, -eye], [-eye, -eye], [np.zeros((1, k)), np.ones((1, k))]])
    b_ub = np.concatenate([w0, -w0, [2.0 * amb.radius]])
    a_eq = np.concatenate([np.ones(k), np.zeros(k)])[None, :]
    lp = make_lp(np.concatenate([-coeff, np.zeros(k)]), a_eq=a_eq, b_eq=[1.0], a_ub=a_ub, b_ub=b_ub)
    sol = solve_lp(lp)
    if sol.status != "OPTIMAL":
        raise SolverError(f"certificate LP returned {sol.status}", lp)
    return opponent, sol.point[:k]


def rho_from_data(n: int, k: int, delta: float) -> float:
    """Data-driven radius: min(1, sqrt(K/n) + sqrt((2/n) log(2/delta)))."""
    if n <= 0 or k <= 0:
        raise ValueError("n and K must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return min(1.0, math.sqrt(k / n) + math.sqrt((2.0 / n) * math.log(2.0 / delta)))


def sparsify(
    p_star: Lottery,
    amb: TvBall,
    epsilon: float,
    trials: int = 30,
    seed: int = 0,
) -> Lottery:
    """Sample a sparse lottery within epsilon of p_star's robust value.

    Draws s indices from p_star, where s is the smallest support size the
    sampling bound certifies, and keeps the best empirical distribution
    across trials. Each trial independently succeeds with probability at
    least one half, so exhausting the trial budget is reported as an
    error rather than returning a silently weaker lottery.
    """
    if not isinstance(amb, TvBall):
        raise TypeError("sparsify needs a TV-ball ambiguity set")
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    if trials < 1:
        raise ValueError("trials must be positive")
    rho0 = small_radius_threshold(amb.center)
    if amb.radius > rho0:
        raise ValueError(f"radius {amb.radius} exceeds the small-radius threshold {rho0}")
    if tuple(p_star.roster) != amb.roster:
        raise ValueError("lottery roster does not match the ambiguity set")

    m = len(amb.roster)
    k = amb.margins.k
    s = sparse_support_bound(m, k, epsilon, amb.radius)
    target = inner_min_value(p_star, amb) - epsilon

    probs = p_star.probs / p_star.probs.sum()
    best_probs: np.ndarray | None = None
    best_value = -np.inf
    for trial in range(trials):
        rng = substream(seed, "sparsify", trial)
        draws = rng.choice(m, size=s, p=probs)
        empirical = np.bincount(draws, minlength=m) / float(s)
        value = inner_min_value(empirical, amb)
        if value > best_value:
            best_value = value
            best_probs = empirical
    if best_probs is None or best_value < target:
        raise SparsifyError(
            f"no trial reached value {target:.6g} within {trials} attempts; best {best_value:.6g}",
            best_value=float(best_value),
        )
    return Lottery(roster=amb.roster, probs=best_probs, value=float(best_value))


def sparse_support_bound(m: int, k: int, epsilon: float, rho: float) -> int:
    """Support size certified by the sampling argument."""
    first = (8.0 / epsilon**2) * math.log(4.0 * m)
    second = (32.0 * rho**2 / epsilon**2) * math.log(8.0 * m * k)
    return int(math.ceil(max(first, second)))


def mixture_ambiguity(a: VertexHull, b: VertexHull, lam: float) -> VertexHull:
    """Minkowski mix of two hulls: all pairwise blends of their vertices."""
    if not isinstance(a, VertexHull) or not isinstance(b, VertexHull):
        raise TypeError("mixture_ambiguity operates on vertex hulls")
    if a.roster != b.roster:
        raise ValueError("hulls must share a roster")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    seen: dict[bytes, MarginMatrix] = {}
    for ma in a.matrices:
        for mb in b.matrices:
            blend = lam * ma.margins + (1.0 - lam) * mb.margins
            key = blend.tobytes()
            if key not in seen:
                seen[key] = MarginMatrix(roster=a.roster, margins=blend)
    return VertexHull(matrices=tuple(seen.values()))


def tv_ball_vertices(center: MixtureWeights, radius: float) -> list[MixtureWeights]:
    """Extreme mixtures of the TV ball: the center plus every single-pair shift.

    Only valid below the small-radius threshold, where moving radius mass
    from one group to another stays inside the simplex.
    """
    rho0 = small_radius_threshold(center)
    if radius > rho0:
        raise ValueError("vertex enumeration only for small radius")
    w0 = center.weights
    if radius == 0.0:
        return [center]
    k = len(center)
    vertices = [center]
    for donor in range(k):
        for receiver in range(k):
            if donor == receiver:
                continue
            w = w0.copy()
            w[donor] -= radius
            w[receiver] += radius
            vertices.append(MixtureWeights(w))
    return vertices


def report_to_json_dict(report: RobustSolveReport, amb: AmbiguitySet) -> dict:
    from .lottery import lottery_to_json_dict

    if isinstance(amb, TvBall):
        rho = amb.radius
        w0 = [float(v) for v in amb.center.weights]
    else:
        rho = None
        w0 = None
    duals = None
    if report.mu is not None:
        duals = {
            "mu": [float(v) for v in report.mu],
            "lambda": [float(v) for v in report.lam],
            "gamma": [[float(v) for v in row] for row in report.gamma],
        }
    return {
        "rho": rho,
        "w0": w0,
        "lottery": lottery_to_json_dict(report.lottery),
        "robust_value": float(report.robust_value),
        "duals": duals,
        "active": list(report.active_alternatives),
    }
