import numpy as np
import pytest

from votelot.prefdata import GroupMargins, MarginMatrix, MixtureWeights

ROSTER3 = ("m1", "m2", "m3")

# Two-group worked example: one group has a clear winner, the other a cycle.
EN = np.array([[0.0, 0.6, 0.6], [-0.6, 0.0, 0.6], [-0.6, -0.6, 0.0]])
ES = np.array([[0.0, 0.6, -0.6], [-0.6, 0.0, 0.6], [0.6, -0.6, 0.0]])

# Counterexample matrices for mixing two ambiguity sets.
MAT_A = np.array([[0.0, -1.0, -1.0], [1.0, 0.0, -1.0], [1.0, 1.0, 0.0]])
MAT_B = np.array([[0.0, -1.0, -1.0], [1.0, 0.0, 1.0], [1.0, -1.0, 0.0]])
MAT_C = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])


@pytest.fixture
def en_matrix() -> MarginMatrix:
    return MarginMatrix(roster=ROSTER3, margins=EN)


@pytest.fixture
def es_matrix() -> MarginMatrix:
    return MarginMatrix(roster=ROSTER3, margins=ES)


@pytest.fixture
def en_es_margins(en_matrix, es_matrix) -> GroupMargins:
    return GroupMargins(
        roster=ROSTER3,
        groups=("en", "es"),
        per_group=(en_matrix, es_matrix),
        votes_per_group=(10.0, 10.0),
    )


def random_skew(rng: np.random.Generator, m: int, scale: float = 1.0) -> np.ndarray:
    raw = rng.uniform(-scale, scale, (m, m))
    skew = (raw - raw.T) / 2.0
    np.fill_diagonal(skew, 0.0)
    return skew


def matrix_of(margins: np.ndarray, roster=None) -> MarginMatrix:
    m = margins.shape[0]
    roster = roster or tuple(f"x{i}" for i in range(m))
    return MarginMatrix(roster=roster, margins=margins)


def group_margins_of(stack, weights_votes=None, roster=None) -> GroupMargins:
    stack = np.asarray(stack)
    k, m, _ = stack.shape
    roster = roster or tuple(f"x{i}" for i in range(m))
    votes = weights_votes or (10.0,) * k
    return GroupMargins(
        roster=roster,
        groups=tuple(f"g{j}" for j in range(k)),
        per_group=tuple(MarginMatrix(roster=roster, margins=stack[j]) for j in range(k)),
        votes_per_group=votes,
    )


def random_center(rng: np.random.Generator, k: int) -> MixtureWeights:
    return MixtureWeights(rng.dirichlet(np.ones(k) * 3.0))
