"""Retrieval metrics over ranked lists with label-overlap relevance.

Every metric takes the relevance flags of one ranked list (a boolean
array in rank order, or a ``RankedResult`` whose ``relevant`` field is
set). ``RelevanceJudge`` produces those flags from label matrices.
"""

from dataclasses import dataclass, replace

import numpy as np

from .retrieval import RankedResult


class NoEvaluableQueries(ValueError):
    pass


@dataclass(frozen=True)
class RelevanceJudge:
    """A database item is relevant to a query iff they share at least one label."""

    query_labels: np.ndarray
    db_labels: np.ndarray

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.query_labels))
        d = np.atleast_2d(np.asarray(self.db_labels))
        if q.shape[1] != d.shape[1]:
            raise ValueError(f"category mismatch: {q.shape[1]} vs {d.shape[1]}")
        object.__setattr__(self, "query_labels", q.astype(np.int64))
        object.__setattr__(self, "db_labels", d.astype(np.int64))

    def flags(self, query_index, db_ids):
        return (self.db_labels[np.asarray(db_ids, dtype=np.int64)] @ self.query_labels[query_index]) > 0

    def total_relevant(self, query_index):
        return int(np.count_nonzero(self.db_labels @ self.query_labels[query_index] > 0))

    def annotate(self, query_index, ranking):
        return replace(ranking, relevant=self.flags(query_index, ranking.ids))


def _flags(ranking):
    if isinstance(ranking, RankedResult):
        if ranking.relevant is None:
            raise ValueError("ranking carries no relevance flags; use RelevanceJudge.annotate")
        ranking = ranking.relevant
    return np.asarray(ranking, dtype=bool).ravel()


def average_precision(ranking, cutoff=None, n_relevant=None):
    """(1/m) * sum_k precision@k * rel(k) over the first ``cutoff`` items.

    m defaults to the number of relevant items inside the evaluated window;
    pass ``n_relevant`` to normalise by a database-wide count instead.
    Returns None when m == 0.
    """
    rel = _flags(ranking)
    if cutoff is not None:
        rel = rel[:cutoff]
    m = int(rel.sum()) if n_relevant is None else int(n_relevant)
    if m == 0:
        return None
    hits = np.cumsum(rel)
    ranks = np.arange(1, rel.size + 1)
    return float(np.sum(hits[rel] / ranks[rel]) / m)


def mean_ap(rankings, judge=None, cutoff=None, mode="window"):
    """Mean AP over queries, skipping those with no relevant items.

    ``rankings[i]`` belongs to query row ``i`` of the judge. ``mode="total"``
    normalises by all relevant items in the database rather than those
    inside the cutoff window.
    """
    if mode not in ("window", "total"):
        raise ValueError(f"unknown AP mode {mode!r}")
    aps = []
    for i, r in enumerate(rankings):
        n_rel = None
        if judge is not None:
            if isinstance(r, RankedResult) and r.relevant is None:
                r = judge.annotate(i, r)
            if mode == "total":
                n_rel = judge.total_relevant(i)
        aps.append(average_precision(r, cutoff, n_rel))
    return mean_of(aps)


def mean_of(aps):
    vals = [a for a in aps if a is not None]
    if not vals:
        raise NoEvaluableQueries("no evaluable queries")
    return float(np.mean(vals))


def topk_precision(ranking, ks):
    """Fraction of relevant items in the first K results, for each K."""
    rel = _flags(ranking)
    hits = np.concatenate([[0], np.cumsum(rel)])
    return [float(hits[min(k, rel.size)] / k) for k in ks]


def recall_at_k(ranking, ks, n_relevant=None):
    """Hits in the first K results over all relevant items; None entries when there are none."""
    rel = _flags(ranking)
    m = int(rel.sum()) if n_relevant is None else int(n_relevant)
    hits = np.concatenate([[0], np.cumsum(rel)])
    if m == 0:
        return [None for _ in ks]
    return [float(hits[min(k, rel.size)] / m) for k in ks]


def precision_recall_curve(ranking, n_relevant=None):
    """(recall, precision) at every prefix length 1..n, as an n x 2 array."""
    rel = _flags(ranking)
    m = int(rel.sum()) if n_relevant is None else int(n_relevant)
    hits = np.cumsum(rel)
    prefix = np.arange(1, rel.size + 1)
    recall = hits / m if m else np.zeros(rel.size)
    return np.column_stack([recall, hits / prefix])


def mean_curve(curves):
    """Average several equal-length curves pointwise."""
    return np.mean(np.stack(curves), axis=0)
