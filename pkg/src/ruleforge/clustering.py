"""Weighted rule distance and hierarchical agglomerative clustering.

The distance between two rules combines structure and content:

    D(r_i, r_j) = w1 * KD(r_i, r_j) + w2 * sum_c lev(r_i[c], r_j[c])

where KD is the cardinality of the symmetric difference of the rules'
attribute-key sets and the sum runs over the keys both rules share (header
synthetics included). Clustering is plain bottom-up agglomeration over the
precomputed matrix with single/complete/average linkage; equal-distance merge
candidates are broken deterministically toward the lowest index pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import RuleforgeError
from .parser import ParsedRule

LINKAGES = ("single", "complete", "average")


class InvalidCut(RuleforgeError):
    """The requested dendrogram cut cannot be taken."""


@dataclass(frozen=True)
class DistanceParams:
    """Weights of the two distance terms; non-negative, not both zero."""

    w1: float = 1.0
    w2: float = 1.0

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0:
            raise ValueError("distance weights must be non-negative")
        if self.w1 == 0 and self.w2 == 0:
            raise ValueError("at least one distance weight must be positive")


@dataclass
class DistanceMatrix:
    """Symmetric pairwise distances with a zero diagonal."""

    entries: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.entries, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError("distance matrix must be square")
        if not np.allclose(matrix, matrix.T):
            raise ValueError("distance matrix must be symmetric")
        if not np.allclose(np.diag(matrix), 0.0):
            raise ValueError("distance matrix diagonal must be zero")
        if (matrix < 0).any():
            raise ValueError("distances must be non-negative")
        self.entries = matrix

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass
class ClusterAssignment:
    """Flat labels plus the merge history that produced them.

    labels maps rule_id (matrix row index) -> cluster label; labels are
    assigned 0..k-1 in order of each cluster's smallest member. merge_history
    records (cluster_a, cluster_b, height) with non-decreasing heights, where
    a cluster is identified by its smallest member index.
    """

    labels: dict[int, int]
    merge_history: tuple[tuple[int, int, float], ...]
    cut: dict[str, float] = field(default_factory=dict)

    def clusters(self) -> dict[int, list[int]]:
        groups: dict[int, list[int]] = {}
        for rule_id, label in sorted(self.labels.items()):
            groups.setdefault(label, []).append(rule_id)
        return groups


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance (insert/delete/substitute), two-row DP."""
    if a == b:
        return 0
    # strip common prefix and suffix; they contribute nothing
    start = 0
    end_a, end_b = len(a), len(b)
    while start < end_a and start < end_b and a[start] == b[start]:
        start += 1
    while end_a > start and end_b > start and a[end_a - 1] == b[end_b - 1]:
        end_a -= 1
        end_b -= 1
    a, b = a[start:end_a], b[start:end_b]
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ch_a in enumerate(a, start=1):
        current = [i]
        for j, ch_b in enumerate(b, start=1):
            cost = 0 if ch_a == ch_b else 1
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost))
        previous = current
    return previous[-1]


def key_distance(rule_i: ParsedRule, rule_j: ParsedRule) -> int:
    """Cardinality of the symmetric difference of the attribute-key sets."""
    return len(rule_i.attribute_keys() ^ rule_j.attribute_keys())


def rule_distance(
    rule_i: ParsedRule, rule_j: ParsedRule, params: DistanceParams | None = None
) -> float:
    """Weighted structural + content distance between two rules."""
    if params is None:
        params = DistanceParams()
    values_i = rule_i.attribute_values()
    values_j = rule_j.attribute_values()
    lev_sum = sum(
        levenshtein(values_i[key], values_j[key])
        for key in values_i.keys() & values_j.keys()
    )
    return params.w1 * key_distance(rule_i, rule_j) + params.w2 * lev_sum


def build_distance_matrix(
    rules: Sequence[ParsedRule], params: DistanceParams | None = None
) -> DistanceMatrix:
    """All pairwise rule distances, with a cache over distinct value pairs."""
    if params is None:
        params = DistanceParams()
    values = [rule.attribute_values() for rule in rules]
    cache: dict[tuple[str, str], int] = {}

    def cached_lev(x: str, y: str) -> int:
        if x == y:
            return 0
        key = (x, y) if x <= y else (y, x)
        found = cache.get(key)
        if found is None:
            found = levenshtein(x, y)
            cache[key] = found
        return found

    n = len(rules)
    matrix = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        keys_i = values[i].keys()
        for j in range(i + 1, n):
            keys_j = values[j].keys()
            kd = len(keys_i ^ keys_j)
            lev_sum = sum(cached_lev(values[i][k], values[j][k]) for k in keys_i & keys_j)
            matrix[i, j] = matrix[j, i] = params.w1 * kd + params.w2 * lev_sum
    return DistanceMatrix(entries=matrix)


def _merge_sequence(
    matrix: DistanceMatrix, linkage: str
) -> list[tuple[int, int, float]]:
    """Full greedy merge sequence via Lance-Williams updates.

    Cluster slots are indexed by their smallest member, so the merge of slots
    i < j lives on in slot i. Ties on distance resolve to the smallest (i, j)
    in row-major order, which np.argmin's first-occurrence rule gives us.
    """
    n = matrix.n
    distances = matrix.entries.copy()
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    work = np.where(upper, distances, np.inf)
    sizes = np.ones(n, dtype=np.int64)
    active = np.ones(n, dtype=bool)
    merges: list[tuple[int, int, float]] = []
    for _ in range(n - 1):
        flat = int(np.argmin(work))
        i, j = divmod(flat, n)
        height = float(work[i, j])
        merges.append((i, j, height))
        others = np.where(active)[0]
        others = others[(others != i) & (others != j)]
        d_ik = distances[i, others]
        d_jk = distances[j, others]
        if linkage == "single":
            updated = np.minimum(d_ik, d_jk)
        elif linkage == "complete":
            updated = np.maximum(d_ik, d_jk)
        else:  # average
            updated = (sizes[i] * d_ik + sizes[j] * d_jk) / (sizes[i] + sizes[j])
        distances[i, others] = updated
        distances[others, i] = updated
        low = np.minimum(i, others)
        high = np.maximum(i, others)
        work[low, high] = updated
        work[j, :] = np.inf
        work[:, j] = np.inf
        sizes[i] += sizes[j]
        active[j] = False
    return merges


def _labels_from_prefix(n: int, merges: Sequence[tuple[int, int, float]]) -> dict[int, int]:
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j, _ in merges:
        parent[find(j)] = find(i)
    groups: dict[int, list[int]] = {}
    for idx in range(n):
        groups.setdefault(find(idx), []).append(idx)
    labels: dict[int, int] = {}
    for label, root in enumerate(sorted(groups, key=lambda r: min(groups[r]))):
        for idx in groups[root]:
            labels[idx] = label
    return labels


def agglomerate(
    matrix: DistanceMatrix,
    linkage: str = "average",
    *,
    cut_height: float | None = None,
    cut_count: int | None = None,
) -> ClusterAssignment:
    """Bottom-up clustering of a distance matrix.

    Cut either at a height (merges with height <= cut_height are applied) or
    to a cluster count. With neither given, the count defaults to
    ceil(sqrt(n)). Labels are 0..k-1 ordered by each cluster's smallest
    member, so the result is deterministic.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"linkage must be one of {LINKAGES}, got {linkage!r}")
    n = matrix.n
    if n == 0:
        raise InvalidCut("cannot cluster an empty matrix")
    if cut_height is not None and cut_count is not None:
        raise InvalidCut("specify cut_height or cut_count, not both")
    if cut_height is None and cut_count is None:
        cut_count = math.ceil(math.sqrt(n))
    if cut_count is not None and not 1 <= cut_count <= n:
        raise InvalidCut(f"cut_count must be in [1, {n}], got {cut_count}")
    if cut_height is not None and cut_height < 0:
        raise InvalidCut(f"cut_height must be >= 0, got {cut_height}")

    merges = _merge_sequence(matrix, linkage)
    if cut_count is not None:
        applied = merges[: n - cut_count]
        cut = {"count": float(cut_count)}
    else:
        # heights are non-decreasing for these linkages, so the cut is a prefix
        applied = []
        for merge in merges:
            if merge[2] > cut_height:
                break
            applied.append(merge)
        cut = {"height": float(cut_height)}
    labels = _labels_from_prefix(n, applied)
    return ClusterAssignment(labels=labels, merge_history=tuple(merges), cut=cut)
