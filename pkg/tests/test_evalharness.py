import numpy as np
import pytest

from votelot.evalharness import (
    SynthConfig,
    cost_frontier,
    generalization_gap,
    planted_margins,
    regret_simulation,
    sweep_rho,
    synth_generate,
)
from votelot.lottery import maximal_lottery
from votelot.prefdata import (
    MixtureWeights,
    build_margins,
    empirical_weights,
    pooled_matrix,
    reversal_rate,
    split,
)
from votelot.robust import TvBall, robust_lottery

from conftest import group_margins_of


def worst_group_value(probs, gm):
    return min(float((probs @ mat.margins).min()) for mat in gm.per_group)


@pytest.fixture(scope="module")
def tables():
    table = synth_generate(SynthConfig(m=4, k=2, cycle_strength=0.5, votes_per_group=300,
                                       seed=21, noise=0.15))
    return split(table, 0.8, seed=0)


class TestSweep:
    def test_points_cover_grid_and_splits(self, tables):
        train, test = tables
        points = sweep_rho(train, test, [0.0, 0.5, 1.0], bootstrap_n=4, seed=1)
        assert len(points) == 6
        assert {(p.rho, p.split) for p in points} == {
            (r, s) for r in (0.0, 0.5, 1.0) for s in ("train", "test")
        }
        for p in points:
            assert 0.0 <= p.overall_mean <= 1.0
            assert p.overall_stderr >= 0.0
            assert set(p.per_group) == {"g0", "g1"}
            assert p.worst_group_mean <= min(v[0] for v in p.per_group.values()) + 1e-12

    def test_bit_for_bit_determinism(self, tables):
        train, test = tables
        a = sweep_rho(train, test, [0.0, 1.0], bootstrap_n=3, seed=5)
        b = sweep_rho(train, test, [0.0, 1.0], bootstrap_n=3, seed=5)
        assert a == b

    def test_full_robustness_helps_worst_group_on_train(self, tables):
        train, _ = tables
        gm = build_margins(train, smoothing=1.0)
        w_hat = empirical_weights(train)
        p0 = robust_lottery(TvBall(gm, w_hat, 0.0)).lottery.probs
        p1 = robust_lottery(TvBall(gm, w_hat, 1.0)).lottery.probs
        assert worst_group_value(p1, gm) >= worst_group_value(p0, gm) - 1e-7

    def test_uniform_opponent_mode(self, tables):
        train, test = tables
        worst = sweep_rho(train, test, [0.5], bootstrap_n=2, seed=3, opponent="worst")
        unif = sweep_rho(train, test, [0.5], bootstrap_n=2, seed=3, opponent="uniform")
        for w, u in zip(worst, unif):
            assert u.overall_mean >= w.overall_mean - 1e-12

    def test_group_mismatch_rejected(self, tables):
        train, test = tables
        smaller = type(train)(
            records=tuple(r for r in train.records if r.group == "g0"),
            roster=train.roster,
            groups=("g0",),
        )
        with pytest.raises(ValueError, match="test but not train"):
            sweep_rho(smaller, test, [0.0], bootstrap_n=1, seed=0)

    def test_empty_grid_rejected(self, tables):
        train, test = tables
        with pytest.raises(ValueError, match="grid"):
            sweep_rho(train, test, [], bootstrap_n=1, seed=0)


class TestGeneralizationGap:
    def test_identical_sweeps_give_zero(self, ):
        table = synth_generate(SynthConfig(m=3, k=2, votes_per_group=200, seed=2, noise=0.1))
        train, test = split(table, 0.8, seed=0)
        points = sweep_rho(train, train, [0.0, 1.0], bootstrap_n=2, seed=0)
        # same table on both sides: train and test series coincide
        gaps = generalization_gap(points, points)
        for _, gap in gaps:
            assert gap == pytest.approx(0.0, abs=1e-12)

    def test_grid_mismatch_rejected(self):
        table = synth_generate(SynthConfig(m=3, k=2, votes_per_group=100, seed=3))
        train, test = split(table, 0.8, seed=0)
        a = sweep_rho(train, test, [0.0], bootstrap_n=1, seed=0)
        b = sweep_rho(train, test, [0.5], bootstrap_n=1, seed=0)
        with pytest.raises(ValueError, match="grids"):
            generalization_gap(a, b)


class TestFrontier:
    def test_big_budget_matches_unconstrained(self):
        gm = planted_margins(SynthConfig(m=4, k=2, seed=4, noise=0.2))
        costs = {mid: c for mid, c in zip(gm.roster, (1.0, 2.0, 3.0, 4.0))}
        unconstrained = robust_lottery(
            TvBall(gm, MixtureWeights(np.array([0.5, 0.5])), 0.5)
        ).robust_value
        points = cost_frontier(gm, costs, budgets=[10.0], rho=0.5)
        assert points[0].feasible
        assert points[0].worst_case_win_rate == pytest.approx(0.5 + 0.5 * unconstrained, abs=1e-7)

    def test_budget_forces_point_mass(self):
        margins = np.array([[0.0, -0.5], [0.5, 0.0]])
        gm = group_margins_of([margins], roster=("cheap", "strong"))
        points = cost_frontier(gm, {"cheap": 1.0, "strong": 10.0}, budgets=[1.0], rho=0.0)
        pt = points[0]
        assert pt.feasible
        assert np.allclose(pt.lottery.probs, [1.0, 0.0], atol=1e-9)
        assert pt.worst_case_win_rate == pytest.approx(0.25, abs=1e-9)
        assert pt.expected_cost == pytest.approx(1.0)

    def test_budget_below_cheapest_is_infeasible_point(self):
        margins = np.array([[0.0, -0.5], [0.5, 0.0]])
        gm = group_margins_of([margins], roster=("cheap", "strong"))
        points = cost_frontier(gm, {"cheap": 1.0, "strong": 10.0}, budgets=[0.5, 1.0], rho=0.0)
        assert not points[0].feasible and points[0].lottery is None
        assert points[1].feasible

    def test_monotone_in_budget(self):
        rng = np.random.default_rng(6)
        gm = planted_margins(SynthConfig(m=5, k=3, seed=6, noise=0.25))
        costs = {mid: float(rng.uniform(0.5, 4.0)) for mid in gm.roster}
        budgets = sorted(rng.uniform(min(costs.values()), 5.0, size=5))
        points = cost_frontier(gm, costs, budgets=budgets, rho=1.0)
        values = [p.worst_case_win_rate for p in points if p.feasible]
        for lo, hi in zip(values, values[1:]):
            assert hi >= lo - 1e-7
        for p in points:
            if p.feasible:
                assert p.expected_cost <= p.budget + 1e-9
                assert p.worst_case_win_rate <= 0.5 + 1e-9

    def test_missing_cost_rejected(self):
        gm = planted_margins(SynthConfig(m=3, k=1, seed=7))
        with pytest.raises(ValueError, match="missing"):
            cost_frontier(gm, {gm.roster[0]: 1.0}, budgets=[1.0], rho=0.0)


class TestRegretSimulation:
    def test_no_heterogeneity_no_regret(self):
        base = planted_margins(SynthConfig(m=4, k=1, seed=8, noise=0.1))
        dup = group_margins_of(np.stack([base.per_group[0].margins] * 3))
        w_star = MixtureWeights(np.array([1.0, 0.0, 0.0]))
        samples = regret_simulation(dup, w_star, n=200, delta=0.1, trials=5, seed=0)
        for s in samples:
            assert abs(s.regret) <= 1e-7

    def test_coverage_and_bound(self):
        gm = planted_margins(SynthConfig(m=4, k=3, seed=9, noise=0.3,
                                         reversal_pairs=((0, 1),)))
        w_star = MixtureWeights(np.array([0.5, 0.3, 0.2]))
        samples = regret_simulation(gm, w_star, n=400, delta=0.1, trials=40, seed=1)
        coverage = np.mean([s.covered for s in samples])
        assert coverage >= 0.9
        for s in samples:
            if s.covered:
                assert -1e-7 <= s.regret <= 4 * s.rho_used + 1e-7
            assert s.bound == pytest.approx(
                4 * np.sqrt(3 / 400) + 4 * np.sqrt(2 / 400 * np.log(2 / 0.1))
            )

    def test_deterministic(self):
        gm = planted_margins(SynthConfig(m=3, k=2, seed=10, noise=0.2))
        w_star = MixtureWeights(np.array([0.6, 0.4]))
        a = regret_simulation(gm, w_star, n=100, delta=0.2, trials=3, seed=2)
        b = regret_simulation(gm, w_star, n=100, delta=0.2, trials=3, seed=2)
        assert a == b


class TestSynth:
    def test_deterministic(self):
        cfg = SynthConfig(m=4, k=2, votes_per_group=50, seed=11, noise=0.1)
        assert synth_generate(cfg).records == synth_generate(cfg).records

    def test_planted_reversal_pair(self):
        cfg = SynthConfig(m=4, k=2, reversal_pairs=((0, 3),), votes_per_group=50, seed=12)
        gm = planted_margins(cfg)
        w = MixtureWeights(np.array([0.5, 0.5]))
        assert reversal_rate(gm, w, 0, 3) == 1.0

    def test_single_group_ladder_recovers_winner(self):
        cfg = SynthConfig(m=4, k=1, votes_per_group=3000, seed=13)
        table = synth_generate(cfg)
        gm = build_margins(table, smoothing=1.0)
        lottery = maximal_lottery(pooled_matrix(gm, MixtureWeights(np.array([1.0]))))
        assert lottery.support == (0,)

    def test_sign_recovery_from_votes(self):
        cfg = SynthConfig(m=3, k=2, reversal_pairs=((0, 1),), votes_per_group=4000, seed=14)
        truth = planted_margins(cfg)
        table = synth_generate(cfg)
        gm = build_margins(table, smoothing=0.0)
        agree = 0
        total = 0
        for k in range(2):
            for i in range(3):
                for j in range(i + 1, 3):
                    total += 1
                    if np.sign(gm.per_group[k].margins[i, j]) == np.sign(truth.per_group[k].margins[i, j]):
                        agree += 1
        assert agree == total

    def test_last_model_dominated_in_ladder(self):
        gm = planted_margins(SynthConfig(m=5, k=2, seed=15))
        from votelot.robust import VertexHull, robust_dominated

        hull = VertexHull(gm.per_group)
        assert 4 in robust_dominated(hull)

    def test_config_validation(self):
        with pytest.raises(ValueError, match="cycle"):
            SynthConfig(m=3, k=1, cycle_strength=1.5)
        with pytest.raises(ValueError, match="two models"):
            SynthConfig(m=1, k=1)
        with pytest.raises(ValueError, match="reversal"):
            SynthConfig(m=3, k=2, reversal_pairs=((0, 0),))
