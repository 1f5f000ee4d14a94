"""Position-wise multi-matrix Markov chains over fixed-length sequences.

A chain of order ``l`` keeps one transition table per adjacent position
pair, so a context can change into a state with a different probability
at every point of the sequence.  Contexts shorter than ``l`` are used at
the start of the sequence (position i conditions on ``min(i, l)``
preceding states), and only observed contexts are stored; there is no
smoothing or backoff, which is what guarantees that sampling can never
reach an unseen context.

Also provides the position-independent first-order chain used as a
baseline, and the equal-frequency quantizer that maps continuous kWh
readings onto discrete states and back.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ClosureViolation, DataShapeError, UsageError

PROB_TOL = 1e-9


@dataclass
class Row:
    """One conditional distribution, states sorted ascending."""

    states: np.ndarray
    probs: np.ndarray
    cumprobs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.int64)
        self.probs = np.asarray(self.probs, dtype=np.float64)
        self.cumprobs = np.cumsum(self.probs)

    def sample(self, rng: np.random.Generator) -> int:
        if len(self.states) == 1:
            return int(self.states[0])
        u = rng.random()
        idx = int(np.searchsorted(self.cumprobs, u, side="right"))
        return int(self.states[min(idx, len(self.states) - 1)])

    def total(self) -> float:
        return float(self.probs.sum())


def _row_from_counts(counts: dict[int, int]) -> Row:
    states = np.array(sorted(counts), dtype=np.int64)
    raw = np.array([counts[s] for s in states], dtype=np.float64)
    return Row(states, raw / raw.sum())


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def _check_sequences(sequences) -> list[np.ndarray]:
    seqs = [np.asarray(s, dtype=np.int64) for s in sequences]
    if not seqs:
        raise DataShapeError("need at least one training sequence")
    L = len(seqs[0])
    if any(len(s) != L for s in seqs):
        raise DataShapeError("training sequences must all share one length")
    if L < 2:
        raise DataShapeError("sequences must have length >= 2")
    if any((s < 0).any() for s in seqs):
        raise DataShapeError("state ids must be non-negative")
    return seqs


@dataclass
class MmcModel:
    order_l: int
    length_L: int
    n_states: int
    initial_dist: Row
    position_tables: list[dict[tuple[int, ...], Row]]

    def context_at(self, position: int, history: list[int]) -> tuple[int, ...]:
        width = min(position, self.order_l)
        return tuple(history[position - width : position])

    def validate(self):
        if len(self.position_tables) != self.length_L - 1:
            raise DataShapeError(
                f"expected {self.length_L - 1} position tables, "
                f"found {len(self.position_tables)}"
            )
        if abs(self.initial_dist.total() - 1.0) > PROB_TOL:
            raise DataShapeError("initial distribution does not sum to 1")
        for i, table in enumerate(self.position_tables, start=1):
            width = min(i, self.order_l)
            for context, row in table.items():
                if len(context) != width:
                    raise DataShapeError(
                        f"position {i}: context {context} should have length {width}"
                    )
                if abs(row.total() - 1.0) > PROB_TOL:
                    raise DataShapeError(f"position {i}: row for {context} not stochastic")


def train_mmc(sequences, order_l: int) -> MmcModel:
    """Count (context -> next state) transitions separately per position."""
    if order_l < 1:
        raise UsageError(f"order_l must be >= 1, got {order_l}")
    seqs = _check_sequences(sequences)
    L = len(seqs[0])

    initial_counts: dict[int, int] = {}
    for s in seqs:
        initial_counts[int(s[0])] = initial_counts.get(int(s[0]), 0) + 1

    tables: list[dict[tuple[int, ...], Row]] = []
    for i in range(1, L):
        width = min(i, order_l)
        counts: dict[tuple[int, ...], dict[int, int]] = {}
        for s in seqs:
            context = tuple(int(x) for x in s[i - width : i])
            nxt = int(s[i])
            bucket = counts.setdefault(context, {})
            bucket[nxt] = bucket.get(nxt, 0) + 1
        tables.append({ctx: _row_from_counts(c) for ctx, c in sorted(counts.items())})

    n_states = int(max(int(s.max()) for s in seqs)) + 1
    return MmcModel(
        order_l=order_l,
        length_L=L,
        n_states=n_states,
        initial_dist=_row_from_counts(initial_counts),
        position_tables=tables,
    )


def sample_mmc(model: MmcModel, seed) -> np.ndarray:
    """Draw one length-L sequence; deterministic for a given seed."""
    rng = _as_rng(seed)
    out = [model.initial_dist.sample(rng)]
    for i in range(1, model.length_L):
        context = model.context_at(i, out)
        row = model.position_tables[i - 1].get(context)
        if row is None:
            raise ClosureViolation(
                f"unseen context {context} at position {i}; "
                "the chain was not trained the way it is being sampled"
            )
        out.append(row.sample(rng))
    return np.asarray(out, dtype=np.int64)


@dataclass
class ClassicMarkovModel:
    """Position-independent first-order chain (single transition table)."""

    n_states: int
    initial_dist: Row
    transitions: dict[int, Row]

    def validate(self):
        if abs(self.initial_dist.total() - 1.0) > PROB_TOL:
            raise DataShapeError("initial distribution does not sum to 1")
        for state, row in self.transitions.items():
            if abs(row.total() - 1.0) > PROB_TOL:
                raise DataShapeError(f"row for state {state} not stochastic")


def train_classic(sequences, n_states: int | None = None) -> ClassicMarkovModel:
    """Pool first-order transition counts across all positions."""
    seqs = _check_sequences(sequences)
    initial_counts: dict[int, int] = {}
    counts: dict[int, dict[int, int]] = {}
    for s in seqs:
        initial_counts[int(s[0])] = initial_counts.get(int(s[0]), 0) + 1
        for a, b in zip(s[:-1], s[1:]):
            bucket = counts.setdefault(int(a), {})
            bucket[int(b)] = bucket.get(int(b), 0) + 1
    observed_max = max(int(s.max()) for s in seqs)
    if n_states is None:
        n_states = observed_max + 1
    elif n_states < observed_max + 1:
        raise UsageError(f"n_states={n_states} below observed max state {observed_max}")
    return ClassicMarkovModel(
        n_states=n_states,
        initial_dist=_row_from_counts(initial_counts),
        transitions={s: _row_from_counts(c) for s, c in sorted(counts.items())},
    )


def sample_classic(model: ClassicMarkovModel, length_L: int, seed) -> np.ndarray:
    """Walk the single table; a state without an outgoing row self-loops."""
    if length_L < 1:
        raise UsageError("length_L must be >= 1")
    rng = _as_rng(seed)
    out = np.empty(length_L, dtype=np.int64)
    state = model.initial_dist.sample(rng)
    out[0] = state
    for i in range(1, length_L):
        row = model.transitions.get(state)
        if row is not None:
            state = row.sample(rng)
        out[i] = state
    return out


@dataclass
class Quantizer:
    """Equal-frequency value binning with per-bin mean representatives."""

    bin_edges: np.ndarray  # strictly increasing interior edges, len = n_bins - 1
    bin_representatives: np.ndarray

    def __post_init__(self):
        self.bin_edges = np.asarray(self.bin_edges, dtype=np.float64)
        self.bin_representatives = np.asarray(self.bin_representatives, dtype=np.float64)

    @property
    def n_bins(self) -> int:
        return len(self.bin_representatives)

    def quantize(self, values) -> np.ndarray:
        return np.searchsorted(self.bin_edges, np.asarray(values, dtype=np.float64), side="right").astype(np.int64)

    def dequantize(self, states) -> np.ndarray:
        return self.bin_representatives[np.asarray(states, dtype=np.int64)]


def fit_quantizer(values, n_bins: int) -> Quantizer:
    """Quantile bins over pooled values; duplicate or empty bins collapse.

    Bin j covers ``[edge_{j-1}, edge_j)`` and is represented by the mean
    of the training values that fall in it, so representatives always lie
    inside their bin.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if len(values) == 0:
        raise DataShapeError("cannot fit a quantizer on no values")
    if n_bins < 1:
        raise UsageError(f"n_bins must be >= 1, got {n_bins}")
    if n_bins == 1:
        edges = np.empty(0)
    else:
        qs = np.arange(1, n_bins) / n_bins
        edges = np.unique(np.quantile(values, qs))
    idx = np.searchsorted(edges, values, side="right")
    populated = np.unique(idx)
    # keep only bins that actually contain training values, preserving the
    # edge that separates each consecutive populated pair
    kept_edges = [edges[populated[j + 1] - 1] for j in range(len(populated) - 1)]
    representatives = [float(values[idx == b].mean()) for b in populated]
    return Quantizer(np.asarray(kept_edges), np.asarray(representatives))
