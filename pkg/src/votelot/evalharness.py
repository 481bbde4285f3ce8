"""Experiment protocols: radius sweeps, cost frontiers, regret simulation,
and synthetic heterogeneous vote generation.

Everything here is a deterministic function of its inputs and a seed;
bootstrap replicates, trials, and synthetic draws all pull from named
substreams so individual pieces can be reproduced in isolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .lottery import Lottery
from .prefdata import (
    GroupMargins,
    MarginMatrix,
    MixtureWeights,
    Outcome,
    VoteRecord,
    VoteTable,
    bootstrap_resample,
    build_margins,
    empirical_weights,
    pooled_matrix,
)
from .robust import (
    InfeasibleConstraintsError,
    LinearConstraint,
    TvBall,
    rho_from_data,
    robust_lottery,
)
from .seeds import substream

__all__ = [
    "FrontierPoint",
    "RegretSample",
    "SweepPoint",
    "SynthConfig",
    "cost_frontier",
    "generalization_gap",
    "planted_margins",
    "regret_simulation",
    "sweep_rho",
    "synth_generate",
]


@dataclass(frozen=True)
class SweepPoint:
    """Bootstrap win-rate summary of one robust lottery on one split."""

    rho: float
    split: str
    overall_mean: float
    overall_stderr: float
    per_group: dict[str, tuple[float, float]]
    worst_group_mean: float
    worst_group_stderr: float


@dataclass(frozen=True)
class FrontierPoint:
    budget: float
    feasible: bool
    lottery: Lottery | None
    worst_case_win_rate: float
    expected_cost: float


@dataclass(frozen=True)
class RegretSample:
    trial: int
    rho_used: float
    regret: float
    covered: bool
    bound: float


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return mean, stderr


def _group_win_rate(p: np.ndarray, margins: np.ndarray, opponent: str) -> float:
    """Win rate of p on one group's matrix against its worst (or uniform) opponent."""
    row = p @ margins
    if opponent == "worst":
        return 0.5 + 0.5 * float(row.min())
    return 0.5 + 0.5 * float(row.mean())


def sweep_rho(
    train: VoteTable,
    test: VoteTable,
    grid: Sequence[float],
    bootstrap_n: int,
    seed: int,
    eta: float = 1.0,
    tie_policy: str = "drop",
    opponent: str = "worst",
    stratified: bool = False,
) -> list[SweepPoint]:
    """Solve the robust lottery per radius on the training margins, then
    score it on bootstrap replicates of both splits.

    Per-group win rates face the group's best response by default
    (``opponent="worst"``); ``"uniform"`` scores against a uniformly
    random opponent instead. The overall rate uses the replicate's pooled
    matrix under its own empirical weights.
    """
    if not grid:
        raise ValueError("radius grid is empty")
    if opponent not in ("worst", "uniform"):
        raise ValueError(f"opponent must be 'worst' or 'uniform', got {opponent!r}")
    if train.roster != test.roster:
        raise ValueError("train and test tables must share a roster")
    if not set(test.groups) <= set(train.groups):
        missing = sorted(set(test.groups) - set(train.groups))
        raise ValueError(f"groups present in test but not train: {missing}")

    gm_train = build_margins(train, smoothing=eta, tie_policy=tie_policy)
    w_train = empirical_weights(train)

    lotteries: dict[float, Lottery] = {}
    for rho in grid:
        report = robust_lottery(TvBall(gm_train, w_train, float(rho)))
        lotteries[float(rho)] = report.lottery

    points: list[SweepPoint] = []
    for split_name, table in (("train", train), ("test", test)):
        replicates = []
        for rep in range(bootstrap_n):
            resampled = bootstrap_resample(table, seed=_replicate_seed(seed, split_name, rep), stratified=stratified)
            gm_rep = build_margins(resampled, smoothing=eta, tie_policy=tie_policy)
            w_rep = empirical_weights(resampled)
            replicates.append((gm_rep, w_rep))
        for rho in grid:
            p = lotteries[float(rho)].probs
            overall = np.empty(bootstrap_n)
            worst = np.empty(bootstrap_n)
            group_vals = {g: np.empty(bootstrap_n) for g in gm_train.groups}
            for r, (gm_rep, w_rep) in enumerate(replicates):
                per_group = np.array(
                    [_group_win_rate(p, mat.margins, opponent) for mat in gm_rep.per_group]
                )
                for g, v in zip(gm_rep.groups, per_group):
                    group_vals[g][r] = v
                worst[r] = per_group.min()
                overall[r] = _group_win_rate(p, pooled_matrix(gm_rep, w_rep).margins, opponent)
            o_mean, o_se = _mean_stderr(overall)
            w_mean, w_se = _mean_stderr(worst)
            points.append(
                SweepPoint(
                    rho=float(rho),
                    split=split_name,
                    overall_mean=o_mean,
                    overall_stderr=o_se,
                    per_group={g: _mean_stderr(group_vals[g]) for g in gm_train.groups},
                    worst_group_mean=w_mean,
                    worst_group_stderr=w_se,
                )
            )
    return points


def _replicate_seed(seed: int, split_name: str, rep: int) -> int:
    # distinct substream per (split, replicate); bootstrap_resample hashes again
    base = substream(seed, f"sweep-{split_name}", rep)
    return int(base.integers(0, 2**63 - 1))


def generalization_gap(
    sweep_train: Sequence[SweepPoint],
    sweep_test: Sequence[SweepPoint],
) -> list[tuple[float, float]]:
    """Per-radius gap: overall train mean minus overall test mean."""
    train_points = {pt.rho: pt for pt in sweep_train if pt.split == "train"}
    test_points = {pt.rho: pt for pt in sweep_test if pt.split == "test"}
    if set(train_points) != set(test_points):
        raise ValueError("train and test sweeps cover different radius grids")
    return [
        (rho, train_points[rho].overall_mean - test_points[rho].overall_mean)
        for rho in sorted(train_points)
    ]


def cost_frontier(
    gm: GroupMargins,
    costs: Mapping[str, float],
    budgets: Sequence[float],
    rho: float,
) -> list[FrontierPoint]:
    """Robust lottery under an expected-cost cap, for each budget.

    Budgets below the cheapest model are reported as infeasible points
    rather than raised, so a frontier sweep always returns one point per
    requested budget.
    """
    missing = [mid for mid in gm.roster if mid not in costs]
    if missing:
        raise ValueError(f"costs missing for models: {missing}")
    cost_vec = np.array([float(costs[mid]) for mid in gm.roster])
    if np.any(cost_vec < 0):
        raise ValueError("model costs must be nonnegative")
    w0 = MixtureWeights(np.array(gm.votes_per_group) / sum(gm.votes_per_group))
    ball = TvBall(gm, w0, rho)

    points: list[FrontierPoint] = []
    for budget in budgets:
        b = float(budget)
        if b < cost_vec.min():
            points.append(
                FrontierPoint(budget=b, feasible=False, lottery=None,
                              worst_case_win_rate=float("nan"), expected_cost=float("nan"))
            )
            continue
        try:
            report = robust_lottery(ball, extra_constraints=(LinearConstraint(cost_vec, b),))
        except InfeasibleConstraintsError:
            points.append(
                FrontierPoint(budget=b, feasible=False, lottery=None,
                              worst_case_win_rate=float("nan"), expected_cost=float("nan"))
            )
            continue
        lottery = report.lottery
        points.append(
            FrontierPoint(
                budget=b,
                feasible=True,
                lottery=lottery,
                worst_case_win_rate=0.5 + 0.5 * report.robust_value,
                expected_cost=float(lottery.probs @ cost_vec),
            )
        )
    return points


def regret_simulation(
    gm: GroupMargins,
    w_star: MixtureWeights,
    n: int,
    delta: float,
    trials: int,
    seed: int,
) -> list[RegretSample]:
    """Monte Carlo of the plug-in pipeline: sample group labels from the
    true mixture, fit the empirical mixture, pick the radius from (n,
    delta), solve, and measure regret under the true mixture.

    Group matrices are taken as exact so only mixture-estimation error is
    in play. Regret is the negated game value of the estimated lottery on
    the true pooled matrix; coverage records whether the true mixture
    landed inside the chosen ball.
    """
    if len(w_star) != gm.k:
        raise ValueError(f"expected {gm.k} mixture weights, got {len(w_star)}")
    if n <= 0 or trials <= 0:
        raise ValueError("n and trials must be positive")
    rho = rho_from_data(n, gm.k, delta)
    bound = 4.0 * math.sqrt(gm.k / n) + 4.0 * math.sqrt((2.0 / n) * math.log(2.0 / delta))
    true_matrix = pooled_matrix(gm, w_star)

    samples: list[RegretSample] = []
    for trial in range(trials):
        rng = substream(seed, "regret", trial)
        counts = np.bincount(rng.choice(gm.k, size=n, p=w_star.weights), minlength=gm.k)
        w_hat = MixtureWeights(counts / n)
        report = robust_lottery(TvBall(gm, w_hat, rho))
        value_true = float((report.lottery.probs @ true_matrix.margins).min())
        covered = 0.5 * float(np.abs(w_hat.weights - w_star.weights).sum()) <= rho
        samples.append(
            RegretSample(trial=trial, rho_used=rho, regret=-value_true, covered=covered, bound=bound)
        )
    return samples


@dataclass(frozen=True)
class SynthConfig:
    """Recipe for planted heterogeneous margins and sampled votes.

    Models sit on a quality ladder (model 0 strongest, the last model
    uniformly dominated). ``cycle_strength`` overwrites the first three
    models of group 0 with a cycle of that margin; each pair listed in
    ``reversal_pairs`` flips sign in every odd-indexed group. Group
    matrices then get skew noise of size ``noise`` except where structure
    was planted.
    """

    m: int
    k: int
    cycle_strength: float = 0.0
    reversal_pairs: tuple[tuple[int, int], ...] = ()
    votes_per_group: int = 1000
    seed: int = 0
    ladder_gap: float = 0.8
    noise: float = 0.0

    def __post_init__(self):
        if self.m < 2 or self.k < 1:
            raise ValueError("need at least two models and one group")
        if not 0.0 <= self.cycle_strength <= 1.0:
            raise ValueError(f"cycle strength must lie in [0, 1], got {self.cycle_strength}")
        for (i, j) in self.reversal_pairs:
            if not (0 <= i < self.m and 0 <= j < self.m) or i == j:
                raise ValueError(f"bad reversal pair ({i}, {j})")


def _model_ids(m: int) -> tuple[str, ...]:
    width = len(str(m - 1))
    return tuple(f"m{str(i).zfill(width)}" for i in range(m))


def _group_ids(k: int) -> tuple[str, ...]:
    width = len(str(k - 1)) if k > 1 else 1
    return tuple(f"g{str(g).zfill(width)}" for g in range(k))


def planted_margins(config: SynthConfig) -> GroupMargins:
    """The true per-group margin matrices behind synth_generate's votes."""
    m, k = config.m, config.k
    idx = np.arange(m)
    base = np.clip(config.ladder_gap * (idx[None, :] - idx[:, None]) / max(m - 1, 1), -0.95, 0.95)
    rng = substream(config.seed, "synth-margins")
    structured = np.zeros((m, m), dtype=bool)
    if config.cycle_strength > 0 and m >= 3:
        for (i, j) in ((0, 1), (1, 2), (2, 0)):
            structured[i, j] = structured[j, i] = True
    for (i, j) in config.reversal_pairs:
        structured[i, j] = structured[j, i] = True

    matrices = []
    roster = _model_ids(m)
    for g in range(k):
        mat = base.copy()
        if config.noise > 0:
            pert = rng.uniform(-config.noise, config.noise, (m, m))
            pert = (pert - pert.T) / 2.0
            pert[structured] = 0.0
            mat = np.clip(mat + pert, -0.95, 0.95)
            mat = (mat - mat.T) / 2.0
        if config.cycle_strength > 0 and m >= 3 and g == 0:
            for (i, j) in ((0, 1), (1, 2), (2, 0)):
                mat[i, j] = config.cycle_strength
                mat[j, i] = -config.cycle_strength
        for (i, j) in config.reversal_pairs:
            sign = -1.0 if g % 2 == 1 else 1.0
            mag = abs(base[i, j]) if base[i, j] != 0 else 0.5 * config.ladder_gap
            mat[i, j] = sign * mag
            mat[j, i] = -sign * mag
        matrices.append(MarginMatrix(roster=roster, margins=mat))
    return GroupMargins(
        roster=roster,
        groups=_group_ids(k),
        per_group=tuple(matrices),
        votes_per_group=(float(config.votes_per_group),) * k,
        eta=0.0,
        tie_policy="drop",
    )


def synth_generate(config: SynthConfig) -> VoteTable:
    """Sample pairwise votes whose outcome probabilities follow the planted margins."""
    gm = planted_margins(config)
    m, k = config.m, config.k
    roster = gm.roster
    groups = gm.groups
    rng = substream(config.seed, "synth-votes")
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    records: list[VoteRecord] = []
    for g in range(k):
        margins = gm.per_group[g].margins
        pair_idx = rng.integers(0, len(pairs), size=config.votes_per_group)
        u = rng.random(config.votes_per_group)
        for t in range(config.votes_per_group):
            i, j = pairs[pair_idx[t]]
            p_win = 0.5 + 0.5 * margins[i, j]
            outcome = Outcome.A_WINS if u[t] < p_win else Outcome.B_WINS
            records.append(VoteRecord(roster[i], roster[j], outcome, groups[g]))
    return VoteTable(records=tuple(records), roster=roster, groups=groups)
