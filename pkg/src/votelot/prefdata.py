"""Vote ingestion, per-group margin matrices, and descriptive statistics.

Raw pairwise comparisons arrive as (model_a, model_b, winner, group)
records. Each group's votes are condensed into a skew-symmetric matrix of
empirical win margins; mixtures of groups pool those matrices linearly.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np

from .seeds import substream

__all__ = [
    "GroupMargins",
    "MarginMatrix",
    "MixtureWeights",
    "Outcome",
    "VoteParseError",
    "VoteRecord",
    "VoteTable",
    "bootstrap_resample",
    "build_margins",
    "empirical_weights",
    "group_margins_from_json",
    "group_margins_to_json",
    "parse_votes",
    "pooled_matrix",
    "reversal_rate",
    "split",
    "win_rate",
]

logger = logging.getLogger(__name__)

_WEIGHT_SUM_TOL = 1e-12
_MATRIX_TOL = 1e-9


class Outcome(enum.Enum):
    A_WINS = "a"
    B_WINS = "b"
    TIE = "tie"


class VoteParseError(ValueError):
    """Malformed vote input; message carries the offending line number."""


@dataclass(frozen=True)
class VoteRecord:
    model_a: str
    model_b: str
    outcome: Outcome
    group: str
    weight: float = 1.0

    def __post_init__(self):
        if self.model_a == self.model_b:
            raise ValueError(f"self-comparison: {self.model_a!r} vs itself")
        if not self.weight >= 0:
            raise ValueError(f"weight must be nonnegative, got {self.weight}")


@dataclass(frozen=True)
class VoteTable:
    """Immutable batch of vote records with a fixed model roster and group list."""

    records: tuple[VoteRecord, ...]
    roster: tuple[str, ...]
    groups: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "roster", tuple(self.roster))
        object.__setattr__(self, "groups", tuple(self.groups))
        if len(set(self.roster)) != len(self.roster):
            raise ValueError("roster contains duplicate model ids")
        if len(set(self.groups)) != len(self.groups):
            raise ValueError("group list contains duplicates")
        roster = set(self.roster)
        groups = set(self.groups)
        for rec in self.records:
            if rec.model_a not in roster or rec.model_b not in roster:
                raise ValueError(f"record references model outside roster: {rec}")
            if rec.group not in groups:
                raise ValueError(f"record references unknown group: {rec}")

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class MarginMatrix:
    """Skew-symmetric win margins plus the per-pair comparison counts behind them."""

    roster: tuple[str, ...]
    margins: np.ndarray
    counts: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "roster", tuple(self.roster))
        m = len(self.roster)
        margins = np.ascontiguousarray(self.margins, dtype=float)
        counts = self.counts
        counts = np.zeros((m, m)) if counts is None else np.ascontiguousarray(counts, dtype=float)
        if margins.shape != (m, m) or counts.shape != (m, m):
            raise ValueError("matrix shape must match roster length")
        if np.max(np.abs(margins + margins.T)) > _MATRIX_TOL:
            raise ValueError("margins must be skew-symmetric")
        if np.max(np.abs(np.diag(margins))) > _MATRIX_TOL:
            raise ValueError("margin diagonal must be zero")
        if np.max(np.abs(margins)) > 1 + _MATRIX_TOL:
            raise ValueError("margins must lie in [-1, 1]")
        if np.max(np.abs(counts - counts.T)) > _MATRIX_TOL or np.any(counts < 0):
            raise ValueError("counts must be symmetric and nonnegative")
        if np.max(np.abs(np.diag(counts))) > _MATRIX_TOL:
            raise ValueError("count diagonal must be zero")
        margins.flags.writeable = False
        counts.flags.writeable = False
        object.__setattr__(self, "margins", margins)
        object.__setattr__(self, "counts", counts)

    @property
    def m(self) -> int:
        return len(self.roster)


@dataclass(frozen=True)
class MixtureWeights:
    """A probability vector over groups."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a nonempty vector")
        if np.any(w < -_WEIGHT_SUM_TOL):
            raise ValueError("weights must be nonnegative")
        if abs(float(w.sum()) - 1.0) > _WEIGHT_SUM_TOL:
            raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
        w = np.maximum(w, 0.0)
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class GroupMargins:
    """One margin matrix per group, all on the same roster ordering."""

    roster: tuple[str, ...]
    groups: tuple[str, ...]
    per_group: tuple[MarginMatrix, ...]
    votes_per_group: tuple[float, ...]
    eta: float = 0.0
    tie_policy: str = "drop"

    def __post_init__(self):
        object.__setattr__(self, "roster", tuple(self.roster))
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "per_group", tuple(self.per_group))
        object.__setattr__(self, "votes_per_group", tuple(float(v) for v in self.votes_per_group))
        if len(self.groups) != len(self.per_group) or len(self.groups) != len(self.votes_per_group):
            raise ValueError("groups, per_group and votes_per_group must align")
        for mat in self.per_group:
            if mat.roster != self.roster:
                raise ValueError("all group matrices must share the roster ordering")
        if any(v < 0 for v in self.votes_per_group):
            raise ValueError("votes_per_group must be nonnegative")

    @property
    def m(self) -> int:
        return len(self.roster)

    @property
    def k(self) -> int:
        return len(self.groups)

    def stacked(self) -> np.ndarray:
        """The (K, m, m) stack of group margin matrices."""
        return np.stack([g.margins for g in self.per_group])


_WINNER_TOKENS = {"a": Outcome.A_WINS, "b": Outcome.B_WINS, "tie": Outcome.TIE}
_REQUIRED_FIELDS = ("model_a", "model_b", "winner", "group")


def parse_votes(
    data: bytes | IO[bytes],
    format: str = "csv",
    groups: Iterable[str] | None = None,
) -> VoteTable:
    """Parse a CSV or JSONL byte stream of pairwise votes.

    CSV expects a header ``model_a,model_b,winner,group[,weight]``; JSONL
    expects one object per line with the same keys. ``winner`` must be one
    of ``a``, ``b``, ``tie``. Line numbers in errors count data rows, so
    the CSV header does not shift them. When ``groups`` is given, records
    from other groups are dropped and the dropped count is logged.
    """
    raw = data if isinstance(data, bytes) else data.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise VoteParseError(f"input is not valid UTF-8: {exc}") from exc

    whitelist = None if groups is None else set(groups)
    if format == "csv":
        rows = _iter_csv_rows(text)
    elif format == "jsonl":
        rows = _iter_jsonl_rows(text)
    else:
        raise VoteParseError(f"unknown format {format!r}; expected csv or jsonl")

    records: list[VoteRecord] = []
    dropped = 0
    for lineno, row in rows:
        for key in _REQUIRED_FIELDS:
            if key not in row or row[key] in (None, ""):
                raise VoteParseError(f"missing field {key!r} at line {lineno}")
        winner = str(row["winner"]).strip().lower()
        if winner not in _WINNER_TOKENS:
            raise VoteParseError(f"unknown winner token {row['winner']!r} at line {lineno}")
        model_a = str(row["model_a"]).strip()
        model_b = str(row["model_b"]).strip()
        if model_a == model_b:
            raise VoteParseError(f"self-comparison at line {lineno}")
        group = str(row["group"]).strip()
        weight = 1.0
        if row.get("weight") not in (None, ""):
            try:
                weight = float(row["weight"])
            except (TypeError, ValueError):
                raise VoteParseError(f"bad weight {row['weight']!r} at line {lineno}") from None
        if not (math.isfinite(weight) and weight >= 0):
            raise VoteParseError(f"weight must be a nonnegative number at line {lineno}")
        if whitelist is not None and group not in whitelist:
            dropped += 1
            continue
        records.append(VoteRecord(model_a, model_b, _WINNER_TOKENS[winner], group, weight))

    if dropped:
        logger.info("dropped %d records outside group whitelist", dropped)
    roster = tuple(sorted({r.model_a for r in records} | {r.model_b for r in records}))
    group_ids = tuple(sorted({r.group for r in records}))
    return VoteTable(records=tuple(records), roster=roster, groups=group_ids)


def _iter_csv_rows(text: str):
    reader = csv.reader(io.StringIO(text))
    header: list[str] | None = None
    lineno = 0
    for cells in reader:
        if not cells or all(c.strip() == "" for c in cells):
            continue
        if header is None:
            header = [c.strip().lower() for c in cells]
            missing = [f for f in _REQUIRED_FIELDS if f not in header]
            if missing:
                raise VoteParseError(f"CSV header missing fields: {', '.join(missing)}")
            continue
        lineno += 1
        if len(cells) > len(header):
            raise VoteParseError(f"malformed row at line {lineno}: too many fields")
        yield lineno, dict(zip(header, (c.strip() for c in cells)))


def _iter_jsonl_rows(text: str):
    lineno = 0
    for line in text.splitlines():
        if not line.strip():
            continue
        lineno += 1
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise VoteParseError(f"malformed row at line {lineno}: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise VoteParseError(f"malformed row at line {lineno}: expected an object")
        yield lineno, obj


def build_margins(
    votes: VoteTable,
    smoothing: float = 0.0,
    tie_policy: str = "drop",
) -> GroupMargins:
    """Condense votes into per-group margin matrices.

    For each group and ordered pair (i, j), the raw win count w_ij is
    regularized to w_ij + smoothing before forming
    (w'_ij - w'_ji) / (w'_ij + w'_ji); with zero smoothing an unplayed
    pair gets margin zero. Ties are dropped by default; under
    ``half_win`` a tie adds 0.5 to both directions. The counts matrices
    record the unsmoothed totals.
    """
    if smoothing < 0:
        raise ValueError(f"smoothing must be nonnegative, got {smoothing}")
    if tie_policy not in ("drop", "half_win"):
        raise ValueError(f"tie_policy must be 'drop' or 'half_win', got {tie_policy!r}")

    m = len(votes.roster)
    k = len(votes.groups)
    model_index = {mid: i for i, mid in enumerate(votes.roster)}
    group_index = {gid: g for g, gid in enumerate(votes.groups)}

    wins = np.zeros((k, m, m))
    group_totals = np.zeros(k)
    for rec in votes.records:
        g = group_index[rec.group]
        i = model_index[rec.model_a]
        j = model_index[rec.model_b]
        group_totals[g] += rec.weight
        if rec.outcome is Outcome.A_WINS:
            wins[g, i, j] += rec.weight
        elif rec.outcome is Outcome.B_WINS:
            wins[g, j, i] += rec.weight
        elif tie_policy == "half_win":
            wins[g, i, j] += 0.5 * rec.weight
            wins[g, j, i] += 0.5 * rec.weight

    matrices = []
    for g in range(k):
        w = wins[g]
        counts = w + w.T
        smoothed = w + smoothing
        totals = smoothed + smoothed.T
        with np.errstate(divide="ignore", invalid="ignore"):
            margins = np.where(totals > 0, (smoothed - smoothed.T) / np.where(totals > 0, totals, 1.0), 0.0)
        np.fill_diagonal(margins, 0.0)
        np.fill_diagonal(counts, 0.0)
        matrices.append(MarginMatrix(roster=votes.roster, margins=margins, counts=counts))

    return GroupMargins(
        roster=votes.roster,
        groups=votes.groups,
        per_group=tuple(matrices),
        votes_per_group=tuple(group_totals),
        eta=float(smoothing),
        tie_policy=tie_policy,
    )


def pooled_matrix(gm: GroupMargins, w: MixtureWeights) -> MarginMatrix:
    """Entrywise convex combination of the group matrices; counts are summed."""
    if len(w) != gm.k:
        raise ValueError(f"expected {gm.k} mixture weights, got {len(w)}")
    margins = np.tensordot(w.weights, gm.stacked(), axes=1)
    counts = sum((g.counts for g in gm.per_group), np.zeros((gm.m, gm.m)))
    return MarginMatrix(roster=gm.roster, margins=margins, counts=counts)


def empirical_weights(votes: VoteTable) -> MixtureWeights:
    """Group frequencies by total record weight."""
    if not votes.records:
        raise ValueError("cannot take empirical weights of an empty vote table")
    totals = {g: 0.0 for g in votes.groups}
    for rec in votes.records:
        totals[rec.group] += rec.weight
    arr = np.array([totals[g] for g in votes.groups])
    total = arr.sum()
    if total <= 0:
        raise ValueError("total vote weight is zero")
    return MixtureWeights(arr / total)


def _probs_of(p) -> np.ndarray:
    probs = getattr(p, "probs", p)
    return np.asarray(probs, dtype=float)


def win_rate(p, matrix: MarginMatrix, q) -> float:
    """Probability that a draw from p beats a draw from q: 1/2 + p.M.q / 2."""
    pv = _probs_of(p)
    qv = _probs_of(q)
    m = matrix.m
    if pv.shape != (m,) or qv.shape != (m,):
        raise ValueError("lottery dimensions do not match the matrix roster")
    return float(0.5 + 0.5 * (pv @ matrix.margins @ qv))


def reversal_rate(gm: GroupMargins, w_hat: MixtureWeights, i: int, j: int) -> float:
    """Probability that two distinct groups order the pair (i, j) oppositely.

    Groups are drawn independently from ``w_hat`` conditioned on being
    distinct; a zero margin is its own sign class, so it disagrees with
    both strict signs and agrees only with another zero.
    """
    if i == j:
        raise ValueError("reversal rate needs two distinct models")
    if gm.k < 2:
        raise ValueError("reversal undefined for one group")
    if len(w_hat) != gm.k:
        raise ValueError(f"expected {gm.k} weights, got {len(w_hat)}")
    signs = np.sign([g.margins[i, j] for g in gm.per_group])
    w = w_hat.weights
    disagree = 0.0
    total = 0.0
    for a in range(gm.k):
        for b in range(gm.k):
            if a == b:
                continue
            mass = w[a] * w[b]
            total += mass
            if signs[a] != signs[b]:
                disagree += mass
    if total <= 0:
        raise ValueError("mixture puts all weight on a single group")
    return float(disagree / total)


def split(votes: VoteTable, train_fraction: float, seed: int) -> tuple[VoteTable, VoteTable]:
    """Seeded shuffle split; both halves keep the full roster and group list."""
    if not votes.records:
        raise ValueError("cannot split an empty vote table")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train fraction must be in (0, 1), got {train_fraction}")
    n = len(votes.records)
    perm = substream(seed, "split").permutation(n)
    n_train = int(math.floor(n * train_fraction))
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    train = VoteTable(tuple(votes.records[i] for i in train_idx), votes.roster, votes.groups)
    test = VoteTable(tuple(votes.records[i] for i in test_idx), votes.roster, votes.groups)
    return train, test


def bootstrap_resample(votes: VoteTable, seed: int, stratified: bool = False) -> VoteTable:
    """Resample N records with replacement; stratified keeps per-group counts fixed."""
    if not votes.records:
        raise ValueError("cannot resample an empty vote table")
    n = len(votes.records)
    rng = substream(seed, "bootstrap")
    if stratified:
        chosen: list[int] = []
        by_group: dict[str, list[int]] = {g: [] for g in votes.groups}
        for idx, rec in enumerate(votes.records):
            by_group[rec.group].append(idx)
        for g in votes.groups:
            pool = by_group[g]
            if pool:
                draws = rng.integers(0, len(pool), size=len(pool))
                chosen.extend(pool[d] for d in draws)
        idx = np.array(sorted(chosen))
    else:
        idx = rng.integers(0, n, size=n)
    return VoteTable(tuple(votes.records[i] for i in idx), votes.roster, votes.groups)


def group_margins_to_json(gm: GroupMargins) -> str:
    """Serialize to the documented JSON schema; floats round-trip exactly."""
    payload = {
        "roster": list(gm.roster),
        "groups": list(gm.groups),
        "matrices": {g: mat.margins.tolist() for g, mat in zip(gm.groups, gm.per_group)},
        "counts": {g: mat.counts.tolist() for g, mat in zip(gm.groups, gm.per_group)},
        "votes_per_group": {g: v for g, v in zip(gm.groups, gm.votes_per_group)},
        "eta": gm.eta,
        "tie_policy": gm.tie_policy,
    }
    return json.dumps(payload, indent=2)


def group_margins_from_json(text: str | bytes) -> GroupMargins:
    payload = json.loads(text)
    roster = tuple(payload["roster"])
    groups = tuple(payload["groups"])
    per_group = tuple(
        MarginMatrix(
            roster=roster,
            margins=np.array(payload["matrices"][g], dtype=float),
            counts=np.array(payload["counts"][g], dtype=float),
        )
        for g in groups
    )
    votes = tuple(float(payload["votes_per_group"][g]) for g in groups)
    return GroupMargins(
        roster=roster,
        groups=groups,
        per_group=per_group,
        votes_per_group=votes,
        eta=float(payload.get("eta", 0.0)),
        tie_policy=str(payload.get("tie_policy", "drop")),
    )
