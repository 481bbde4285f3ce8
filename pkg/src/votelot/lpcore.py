"""Dense linear program solver used by every lottery computation.

The solver is a two-phase primal simplex on a dense tableau. Entering
columns are chosen by steepest reduced cost with lowest-index tie-breaks,
dropping to the lowest-index rule through degenerate stretches. The
lottery programs are extremely degenerate, so ratio tests run against a
deterministically perturbed right-hand side while a shadow column carries
the true values through the same pivots; a nonnegative final shadow makes
the basis exactly optimal for the true program, and the rare failures
retry under fresh perturbations before falling back to an exact
lexicographic ratio test. Given byte-identical input the pivot sequence,
and therefore the solution, is byte-identical.

Problem sizes here are a few hundred rows at most, so a dense tableau is
both the simplest and the fastest option that stays fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

__all__ = [
    "FEAS_TOL",
    "PIVOT_TOL",
    "LinearProgram",
    "LpSolution",
    "ResidualReport",
    "SolverError",
    "check_solution",
    "lp_to_text",
    "make_lp",
    "solve_lp",
]

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-10

# Pivot elements this large are numerically safe; smaller ones are used
# only when a column offers nothing better.
_PIVOT_SAFE = 1e-8

# Consecutive non-improving pivots tolerated before Bland's rule kicks in.
_BLAND_TRIGGER = 40

Status = Literal["OPTIMAL", "INFEASIBLE", "UNBOUNDED"]


class SolverError(RuntimeError):
    """The simplex failed to terminate cleanly; carries an LP dump."""

    def __init__(self, message: str, lp: "LinearProgram | None" = None):
        if lp is not None:
            message = f"{message}\n--- LP dump ---\n{lp_to_text(lp)}"
        super().__init__(message)


@dataclass(frozen=True)
class LinearProgram:
    """A maximization LP: max c.x s.t. A_eq x = b_eq, A_ub x <= b_ub, l <= x <= u."""

    objective: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        n = self.objective.shape[0]
        for name in ("objective", "a_eq", "b_eq", "a_ub", "b_ub", "lower", "upper"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.a_eq.shape != (self.b_eq.shape[0], n):
            raise ValueError("equality block dimensions inconsistent")
        if self.a_ub.shape != (self.b_ub.shape[0], n):
            raise ValueError("inequality block dimensions inconsistent")
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ValueError("bound vectors must have one entry per variable")
        for name in ("objective", "a_eq", "b_eq", "a_ub", "b_ub"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains NaN or infinite coefficients")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise ValueError("bounds may be infinite but not NaN")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def n_vars(self) -> int:
        return self.objective.shape[0]


def make_lp(
    objective,
    a_eq=None,
    b_eq=None,
    a_ub=None,
    b_ub=None,
    lower=0.0,
    upper=np.inf,
) -> LinearProgram:
    """Assemble a LinearProgram, broadcasting scalar bounds and filling empty blocks."""
    c = np.atleast_1d(np.asarray(objective, dtype=float))
    n = c.shape[0]
    a_eq = np.zeros((0, n)) if a_eq is None else np.atleast_2d(np.asarray(a_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.atleast_1d(np.asarray(b_eq, dtype=float))
    a_ub = np.zeros((0, n)) if a_ub is None else np.atleast_2d(np.asarray(a_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.atleast_1d(np.asarray(b_ub, dtype=float))
    lo = np.broadcast_to(np.asarray(lower, dtype=float), (n,)).copy()
    up = np.broadcast_to(np.asarray(upper, dtype=float), (n,)).copy()
    return LinearProgram(c, a_eq, b_eq, a_ub, b_ub, lo, up)


@dataclass(frozen=True)
class LpSolution:
    status: Status
    point: np.ndarray | None
    value: float
    max_primal_residual: float


@dataclass(frozen=True)
class ResidualReport:
    """Worst violation per constraint class; negative means slack."""

    eq: float
    ub: float
    bounds: float

    @property
    def max_violation(self) -> float:
        return max(self.eq, self.ub, self.bounds)


def check_solution(lp: LinearProgram, point: np.ndarray) -> ResidualReport:
    """Independently measure how far `point` is from feasibility.

    Equality residual is the largest |A_eq x - b_eq|; inequality and bound
    residuals are signed, so a strictly feasible point reports negatives.
    """
    x = np.asarray(point, dtype=float)
    if x.shape != (lp.n_vars,):
        raise ValueError(f"point has shape {x.shape}, expected ({lp.n_vars},)")
    eq = float(np.max(np.abs(lp.a_eq @ x - lp.b_eq))) if lp.b_eq.size else 0.0
    ub = float(np.max(lp.a_ub @ x - lp.b_ub)) if lp.b_ub.size else 0.0
    lo_viol = lp.lower - x
    up_viol = x - lp.upper
    finite = np.concatenate([lo_viol[np.isfinite(lo_viol)], up_viol[np.isfinite(up_viol)]])
    bounds = float(np.max(finite)) if finite.size else 0.0
    return ResidualReport(eq=eq, ub=ub, bounds=bounds)


def lp_to_text(lp: LinearProgram, max_rows: int = 400) -> str:
    """Render the program in a plain-text LP style for external cross-checking."""

    def _terms(row: np.ndarray) -> str:
        parts = [f"{'+' if v >= 0 else '-'} {abs(v):.17g} x{j}" for j, v in enumerate(row) if v != 0.0]
        return " ".join(parts) if parts else "0"

    lines = ["Maximize", f" obj: {_terms(lp.objective)}", "Subject To"]
    rows = [(f" e{i}: {_terms(r)} = {b:.17g}") for i, (r, b) in enumerate(zip(lp.a_eq, lp.b_eq))]
    rows += [(f" u{i}: {_terms(r)} <= {b:.17g}") for i, (r, b) in enumerate(zip(lp.a_ub, lp.b_ub))]
    if len(rows) > max_rows:
        rows = rows[:max_rows] + [f" ... ({len(rows) - max_rows} more rows)"]
    lines += rows
    lines.append("Bounds")
    for j, (lo, up) in enumerate(zip(lp.lower, lp.upper)):
        lo_s = "-inf" if np.isneginf(lo) else f"{lo:.17g}"
        up_s = "+inf" if np.isposinf(up) else f"{up:.17g}"
        lines.append(f" {lo_s} <= x{j} <= {up_s}")
    lines.append("End")
    return "\n".join(lines)


def solve_lp(
    lp: LinearProgram,
    feas_tol: float = FEAS_TOL,
    pivot_tol: float = PIVOT_TOL,
    max_iter: int | None = None,
) -> LpSolution:
    """Solve the program; INFEASIBLE and UNBOUNDED are returned, not raised.

    The lottery programs are massively degenerate (almost every right-hand
    side is zero), so the solver runs on a deterministically perturbed rhs
    while a shadow column carries the true rhs through the same pivots.
    The perturbed path cannot stall on degenerate vertices, and when the
    shadow stays nonnegative the final basis is both dual- and
    primal-feasible for the true program, i.e. exactly optimal. A
    nonnegative shadow failing to appear triggers fresh perturbations and
    finally the exact lexicographic path.
    """
    std = _Standardized(lp)
    last_failure = "no attempt succeeded"
    for salt in (0, 1, 2, None):
        status, x_std, shadow_min = _two_phase(std, lp, feas_tol, pivot_tol, max_iter, salt)
        if status == "STALLED":
            last_failure = f"stalled with salt {salt}"
            continue
        if status != "OPTIMAL":
            return LpSolution(status=status, point=None, value=float("nan"),
                              max_primal_residual=float("nan"))
        if salt is not None and shadow_min < -feas_tol:
            last_failure = f"perturbed basis infeasible for true rhs by {-shadow_min:.3e}"
            continue
        x = std.recover(x_std)
        value = float(lp.objective @ x)
        residual = check_solution(lp, x).max_violation
        if salt is not None and residual > 1e-6:
            last_failure = f"recovered point violates constraints by {residual:.3e}"
            continue
        x.flags.writeable = False
        return LpSolution(status="OPTIMAL", point=x, value=value,
                          max_primal_residual=max(residual, 0.0))
    raise SolverError(f"simplex failed on every attempt: {last_failure}", lp)


class _Standardized:
    """Conversion of a LinearProgram to equality standard form Ax = b, x >= 0.

    Finite-lower variables are shifted, inverted when only the upper bound
    is finite, and split into a positive pair when free. Finite upper
    bounds on shifted variables become extra inequality rows.
    """

    def __init__(self, lp: LinearProgram):
        n = lp.n_vars
        cols: list[tuple[int, float, float]] = []  # (orig var, sign, shift)
        ub_rows: list[tuple[int, float]] = []  # (std col, rhs) for x_std <= rhs
        for j in range(n):
            lo, up = lp.lower[j], lp.upper[j]
            if np.isneginf(lo) and np.isposinf(up):
                cols.append((j, 1.0, 0.0))
                cols.append((j, -1.0, 0.0))
            elif np.isneginf(lo):
                # only the upper bound is finite: x = up - x_std
                cols.append((j, -1.0, up))
            else:
                cols.append((j, 1.0, lo))
                if not np.isposinf(up):
                    ub_rows.append((len(cols) - 1, up - lo))
        self.cols = cols
        n_std = len(cols)

        # x_orig = C @ x_std + shift
        c_map = np.zeros((n, n_std))
        shift = np.zeros(n)
        for s, (j, sign, sh) in enumerate(cols):
            c_map[j, s] = sign
            if sh != 0.0:
                shift[j] = sh
        self.c_map = c_map
        self.shift = shift

        a_eq = lp.a_eq @ c_map
        b_eq = lp.b_eq - lp.a_eq @ shift
        a_ub = lp.a_ub @ c_map
        b_ub = lp.b_ub - lp.a_ub @ shift
        if ub_rows:
            extra = np.zeros((len(ub_rows), n_std))
            extra_b = np.zeros(len(ub_rows))
            for r, (s, rhs) in enumerate(ub_rows):
                extra[r, s] = 1.0
                extra_b[r] = rhs
            a_ub = np.vstack([a_ub, extra])
            b_ub = np.concatenate([b_ub, extra_b])

        self.n_std = n_std
        self.a_eq, self.b_eq = a_eq, b_eq
        self.a_ub, self.b_ub = a_ub, b_ub
        self.obj_std = c_map.T @ lp.objective

    def recover(self, x_std: np.ndarray) -> np.ndarray:
        return self.c_map @ x_std + self.shift


def _perturbation(m: int, scale: float, salt: int) -> np.ndarray:
    """Deterministic per-row rhs nudges in [1e-9, 2e-9] * scale."""
    r = np.arange(m, dtype=np.uint64)
    h = (r * np.uint64(2654435761) + np.uint64(salt) * np.uint64(97531)) % np.uint64(2**32)
    return scale * 1e-9 * (1.0 + h.astype(float) / 2**32)


def _two_phase(
    std: _Standardized,
    lp: LinearProgram,
    feas_tol: float,
    pivot_tol: float,
    max_iter: int | None,
    salt: int | None,
) -> tuple[str, np.ndarray | None, float]:
    """Run the two-phase simplex. Returns (status, x_std, min shadow rhs).

    The tableau carries two right-hand sides: the last column drives the
    ratio tests (perturbed when salt is given), while the shadow column
    just before it carries the true rhs through the same pivots, so the
    returned solution belongs to the unperturbed program.
    """
    m_eq = std.b_eq.shape[0]
    m_ub = std.b_ub.shape[0]
    m = m_eq + m_ub
    n_std = std.n_std
    n_slack = m_ub

    a = np.zeros((m, n_std + n_slack))
    a[:m_eq, :n_std] = std.a_eq
    a[m_eq:, :n_std] = std.a_ub
    a[m_eq:, n_std:] = np.eye(m_ub)
    b = np.concatenate([std.b_eq, std.b_ub])

    neg = b < 0
    a[neg] *= -1.0
    b = np.abs(b)

    scale = max(1.0, float(np.max(np.abs(b))) if b.size else 1.0)
    if salt is None:
        tau = np.zeros(m)
    else:
        tau = _perturbation(m, scale, salt)

    # Slack columns of non-negated inequality rows start basic; everything
    # else gets an artificial variable.
    needs_art = np.ones(m, dtype=bool)
    basis = np.full(m, -1, dtype=np.int64)
    for r in range(m_eq, m):
        if not neg[r]:
            needs_art[r] = False
            basis[r] = n_std + (r - m_eq)
    art_rows = np.nonzero(needs_art)[0]
    n_art = art_rows.shape[0]
    n_total = n_std + n_slack + n_art

    tableau = np.zeros((m + 1, n_total + 2))
    tableau[:m, : n_std + n_slack] = a
    tableau[:m, -2] = b
    tableau[:m, -1] = b + tau
    for t, r in enumerate(art_rows):
        col = n_std + n_slack + t
        tableau[r, col] = 1.0
        basis[r] = col

    if max_iter is None:
        max_iter = 200 * (m + n_total) + 2000
    stall_abort = max(500, m) if salt is not None else max_iter

    if n_art:
        cost1 = np.zeros(n_total)
        cost1[n_std + n_slack :] = 1.0
        _install_objective(tableau, basis, cost1)
        allowed = np.ones(n_total, dtype=bool)
        outcome = _iterate(tableau, basis, allowed, pivot_tol, max_iter, stall_abort)
        if outcome == "UNBOUNDED":
            raise SolverError("phase-1 objective reported unbounded; cannot happen for a bounded-below sum", lp)
        if outcome == "STALLED":
            return "STALLED", None, 0.0
        phase1_value = -tableau[-1, -1]
        if phase1_value > feas_tol * scale * 10 + 3.0 * float(tau.sum()):
            return "INFEASIBLE", None, 0.0
        _evict_artificials(tableau, basis, n_std + n_slack, pivot_tol)

    allowed = np.ones(n_total, dtype=bool)
    allowed[n_std + n_slack :] = False
    cost2 = np.zeros(n_total)
    cost2[:n_std] = -std.obj_std  # maximize c.x == minimize -c.x
    _install_objective(tableau, basis, cost2)
    outcome = _iterate(tableau, basis, allowed, pivot_tol, max_iter, stall_abort)
    if outcome == "UNBOUNDED":
        return "UNBOUNDED", None, 0.0
    if outcome == "STALLED":
        return "STALLED", None, 0.0

    shadow = tableau[:m, -2]
    shadow_min = float(shadow.min()) if m else 0.0
    x = np.zeros(n_total)
    x[basis] = np.maximum(shadow, 0.0)
    return "OPTIMAL", x[:n_std], shadow_min


def _install_objective(tableau: np.ndarray, basis: np.ndarray, cost: np.ndarray) -> None:
    """Load a cost row and price out the current basis."""
    m = basis.shape[0]
    tableau[-1, :] = 0.0
    tableau[-1, : cost.shape[0]] = cost
    basic_costs = cost[basis]
    nz = np.nonzero(basic_costs)[0]
    if nz.size:
        tableau[-1, :] -= basic_costs[nz] @ tableau[nz, :]
    # exact zeros on basic columns keep later reduced-cost scans clean
    tableau[-1, basis] = 0.0


def _iterate(
    tableau: np.ndarray,
    basis: np.ndarray,
    allowed: np.ndarray,
    pivot_tol: float,
    max_iter: int,
    stall_abort: int,
) -> str:
    """Run simplex pivots. Returns "OPTIMAL", "UNBOUNDED", or "STALLED".

    Entering column: steepest reduced cost, lowest index on ties; after a
    stretch of degenerate pivots the entering rule drops to the
    lowest-index rule until the objective moves again. Leaving row: the
    lexicographic ratio test over the entry basis columns (an invertible
    block, so scaled rows separate there in exact arithmetic). A stretch
    of non-improving pivots longer than ``stall_abort`` reports STALLED so
    the caller can retry under a different perturbation.
    """
    m = basis.shape[0]
    opt_tol = 1e-9
    stall = 0
    bland = False
    last_obj = tableau[-1, -1]
    n_cols = tableau.shape[1] - 2  # real columns, before the shadow and rhs
    reduced = tableau[-1, :n_cols]
    rest = np.setdiff1d(np.arange(n_cols), basis, assume_unique=False)
    lex_order = np.concatenate([basis.copy(), rest, [n_cols + 1]])

    for _ in range(max_iter):
        if bland:
            candidates = np.nonzero((reduced < -opt_tol) & allowed)[0]
            if candidates.size == 0:
                return "OPTIMAL"
            enter = int(candidates[0])
        else:
            masked = np.where(allowed, reduced, np.inf)
            enter = int(np.argmin(masked))
            if masked[enter] >= -opt_tol:
                return "OPTIMAL"

        col = tableau[:m, enter]
        rhs = tableau[:m, -1]
        pos = col > _PIVOT_SAFE
        if not np.any(pos):
            pos = col > pivot_tol
            if not np.any(pos):
                return "UNBOUNDED"
        # negative dust on the rhs must not produce negative ratios, and the
        # tie set must stay essentially exact or pivoting off a near-tie
        # drives other rows infeasible
        ratios = np.where(pos, np.maximum(rhs, 0.0) / np.where(pos, col, 1.0), np.inf)
        best = float(np.min(ratios))
        ties = np.nonzero(ratios <= best + best * 1e-12 + 1e-15)[0]
        if ties.size == 1:
            leave = int(ties[0])
        elif bland:
            # true lowest-index anti-cycling pair with the entering rule above
            leave = int(ties[np.argmin(basis[ties])])
        else:
            leave = _lex_leave(tableau, ties, col, lex_order)

        _pivot(tableau, basis, leave, enter)

        obj = tableau[-1, -1]
        if obj > last_obj + 1e-12 * (1.0 + abs(last_obj)):
            stall = 0
            bland = False
            last_obj = obj
        else:
            stall += 1
            if stall >= stall_abort:
                return "STALLED"
            if stall >= _BLAND_TRIGGER:
                bland = True
    raise SolverError(f"simplex did not terminate within {max_iter} pivots")


def _lex_leave(tableau: np.ndarray, ties: np.ndarray, col: np.ndarray, lex_order: np.ndarray) -> int:
    """Among min-ratio rows, pick the lexicographically smallest scaled row.

    Comparisons are exact: fuzzy merging of nearly-tied entries can pick a
    row that is not the lexicographic minimum, which voids the
    no-basis-repeats argument and lets degenerate solves cycle.
    """
    cand = ties
    scale = col[cand]
    for c in lex_order:
        vals = tableau[cand, c] / scale
        mn = vals.min()
        keep = vals == mn
        if np.count_nonzero(keep) < cand.size:
            cand = cand[keep]
            scale = col[cand]
        if cand.size == 1:
            return int(cand[0])
    return int(cand[0])


def _pivot(tableau: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    piv = tableau[row, col]
    tableau[row, :] /= piv
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= factors[:, None] * tableau[row, :]
    tableau[:, col] = 0.0
    tableau[row, col] = 1.0
    basis[row] = col
    # scrub rounding dust off the rhs so ratio tests stay sane
    rhs = tableau[:-1, -1]
    tiny = (rhs < 0.0) & (rhs > -1e-11)
    rhs[tiny] = 0.0


def _evict_artificials(tableau: np.ndarray, basis: np.ndarray, n_real: int, pivot_tol: float) -> None:
    """Pivot basic artificials onto real columns where possible.

    A row whose artificial cannot be evicted is redundant; leaving the
    artificial basic at zero is harmless because phase 2 never lets
    artificial columns re-enter.
    """
    m = basis.shape[0]
    for r in range(m):
        if basis[r] < n_real:
            continue
        row = tableau[r, :n_real]
        cands = np.nonzero(np.abs(row) > pivot_tol)[0]
        if cands.size:
            best = int(cands[np.argmax(np.abs(row[cands]))])
            _pivot(tableau, basis, r, best)
