"""Consumption-pattern extraction via adaptive K-Means.

Plain seeded Lloyd iteration plus an adaptive outer loop: any cluster
whose member totals are too spread out (population std over mean of the
per-segment total consumption above ``gamma``) is re-clustered with k=2
and the two child centers are appended to the accumulated center set;
the parent center is kept and K grows until every cluster is tight
enough or ``k_max`` is reached.

Lloyd is hand-rolled rather than delegated to a library because the
outer loop needs exact warm-start semantics and empty clusters dropped,
not relocated.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DataShapeError, UsageError
from .profiles import Scale, Segment


def derive_seed(seed: int, *parts) -> int:
    """Stable sub-seed from a base seed and any hashable labels."""
    text = ":".join([str(seed)] + [str(p) for p in parts])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class Pattern:
    pattern_id: int
    scale: Scale
    centroid: np.ndarray
    member_indices: list[int]
    member_totals: np.ndarray = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.member_indices)


@dataclass
class PatternCatalog:
    scale: Scale
    patterns: list[Pattern]
    gamma: float
    hit_k_max: bool = False

    def __len__(self):
        return len(self.patterns)

    def pattern(self, pattern_id: int) -> Pattern:
        return self.patterns[pattern_id]

    @property
    def centroids(self) -> np.ndarray:
        return np.stack([p.centroid for p in self.patterns])


def _as_matrix(segments) -> np.ndarray:
    if isinstance(segments, np.ndarray):
        X = np.asarray(segments, dtype=np.float64)
        if X.ndim != 2:
            raise DataShapeError("segment matrix must be 2-D")
        return X
    rows = [s.values if isinstance(s, Segment) else np.asarray(s, dtype=np.float64) for s in segments]
    if not rows:
        raise DataShapeError("no segments to cluster")
    length = len(rows[0])
    if any(len(r) != length for r in rows):
        raise DataShapeError("segments of mixed lengths cannot be clustered together")
    return np.asarray(rows, dtype=np.float64)


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding; returns fewer centers when distinct points run out."""
    n = len(X)
    first = int(rng.integers(n))
    centers = [X[first]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    while len(centers) < k:
        total = d2.sum()
        if total <= 0.0:
            break  # every remaining point coincides with a chosen center
        idx = int(rng.choice(n, p=d2 / total))
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - centers[-1]) ** 2).sum(axis=1))
    return np.stack(centers)


def _squared_distances(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # ||x-c||^2 expanded; clamp tiny negative values from cancellation
    d2 = (
        (X * X).sum(axis=1)[:, None]
        - 2.0 * X @ centers.T
        + (centers * centers).sum(axis=1)[None, :]
    )
    np.maximum(d2, 0.0, out=d2)
    return d2


def kmeans(
    segments,
    k: int,
    warm_start_centers: np.ndarray | None = None,
    max_iters: int = 300,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd iteration with squared Euclidean distance on raw values.

    Returns ``(assignments, centers)``.  Converges when assignments are
    stable; clusters that lose all members are dropped, so the returned
    center count may be smaller than ``k``.  Cold starts use seeded
    k-means++; ``k`` may exceed the segment count only with a warm start
    (the surplus centers simply end up empty and are dropped).
    """
    X = _as_matrix(segments)
    n = len(X)
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    if warm_start_centers is None:
        if k > n:
            raise UsageError(f"k={k} exceeds the number of segments ({n})")
        rng = np.random.Generator(np.random.PCG64(seed))
        centers = _kmeans_pp_init(X, k, rng)
    else:
        centers = np.asarray(warm_start_centers, dtype=np.float64)
        if centers.ndim != 2 or centers.shape[1] != X.shape[1]:
            raise UsageError("warm-start centers must match the segment dimension")

    assignments = None
    for _ in range(max_iters):
        d2 = _squared_distances(X, centers)
        new_assignments = d2.argmin(axis=1)
        occupied = np.unique(new_assignments)
        if len(occupied) < len(centers):
            centers = centers[occupied]
            remap = np.full(int(occupied.max()) + 1, -1, dtype=np.int64)
            remap[occupied] = np.arange(len(occupied))
            new_assignments = remap[new_assignments]
            assignments = None  # indices shifted; force another pass
        if assignments is not None and np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments
        centers = np.stack(
            [X[assignments == c].mean(axis=0) for c in range(len(centers))]
        )
    return assignments, centers


def totals_ratio(totals: np.ndarray) -> float:
    """Population std over mean of totals; 0 when degenerate, inf when mean=0 with spread."""
    totals = np.asarray(totals, dtype=np.float64)
    if len(totals) <= 1:
        return 0.0
    sigma = float(totals.std())  # population
    mu = float(totals.mean())
    if mu == 0.0:
        return 0.0 if sigma == 0.0 else float("inf")
    return sigma / mu


def cluster_ratio(pattern: Pattern) -> float:
    """Spread ratio of a pattern's member total consumption."""
    if pattern.member_totals is None or len(pattern.member_totals) == 0:
        raise DataShapeError("pattern has no members")
    return totals_ratio(pattern.member_totals)


def adaptive_kmeans(
    segments,
    k_initial: int,
    k_max: int,
    gamma: float,
    seed: int = 0,
    scale: Scale = Scale.DAY,
    max_outer_iters: int = 1000,
) -> PatternCatalog:
    """Grow K until every cluster's total-consumption spread is within gamma.

    Follows the accumulate-and-append scheme: violating clusters are
    re-clustered with k=2 and both child centers are appended while the
    parent center is retained; the next round warm-starts from the whole
    accumulated set, and empty clusters are dropped.  ``hit_k_max`` is
    set when the loop stops with violations still outstanding.
    """
    if not (1 <= k_initial <= k_max):
        raise UsageError(f"need 1 <= k_initial <= k_max, got {k_initial}, {k_max}")
    if gamma <= 0:
        raise UsageError(f"gamma must be > 0, got {gamma}")
    X = _as_matrix(segments)
    totals = X.sum(axis=1)

    K = k_initial
    cnt_tmp: np.ndarray | None = None
    stop = False
    assignments = centers = None
    outer = 0
    while K < k_max and not stop:
        outer += 1
        if outer > max_outer_iters:
            raise RuntimeError(
                f"adaptive k-means failed to settle within {max_outer_iters} rounds"
            )
        stop = True
        assignments, centers = kmeans(
            X, K, warm_start_centers=cnt_tmp, seed=derive_seed(seed, "cold", outer)
        )
        accumulated = [centers]
        for c in range(len(centers)):
            members = np.flatnonzero(assignments == c)
            if totals_ratio(totals[members]) > gamma:
                stop = False
                _, child_centers = kmeans(
                    X[members], 2, seed=derive_seed(seed, "split", outer, c)
                )
                accumulated.append(child_centers)
        cnt_tmp = np.concatenate(accumulated, axis=0)
        K = len(cnt_tmp)
    if assignments is None:
        # k_initial == k_max: the growth loop never runs; do one plain pass
        assignments, centers = kmeans(X, K, seed=derive_seed(seed, "cold", 0))
        stop = all(
            totals_ratio(totals[np.flatnonzero(assignments == c)]) <= gamma
            for c in range(len(centers))
        )

    patterns = []
    for c in range(len(centers)):
        members = np.flatnonzero(assignments == c).tolist()
        patterns.append(
            Pattern(
                pattern_id=c,
                scale=scale,
                centroid=centers[c],
                member_indices=members,
                member_totals=totals[members],
            )
        )
    return PatternCatalog(scale=scale, patterns=patterns, gamma=gamma, hit_k_max=not stop)


def assign_to_nearest(segment, catalog: PatternCatalog) -> int:
    """Id of the catalog centroid closest to the segment (ties: lowest id)."""
    if not catalog.patterns:
        raise DataShapeError("cannot assign against an empty catalog")
    values = segment.values if isinstance(segment, Segment) else np.asarray(segment, dtype=np.float64)
    best_id = -1
    best_d2 = np.inf
    for pattern in catalog.patterns:
        if len(pattern.centroid) != len(values):
            raise DataShapeError(
                f"segment length {len(values)} does not match catalog scale "
                f"length {len(pattern.centroid)}"
            )
        diff = values - pattern.centroid
        d2 = float(diff @ diff)
        if d2 < best_d2:
            best_d2 = d2
            best_id = pattern.pattern_id
    return best_id
