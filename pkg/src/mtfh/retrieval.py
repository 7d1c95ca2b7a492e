"""Exhaustive Hamming ranking over packed binary codes."""

from dataclasses import dataclass

import numpy as np

from .encoder import encode, pack_codes, translate

# direction -> (query modality, database modality)
DIRECTION_MODALITIES = {
    "i2t": ("X", "Y"),
    "t2i": ("Y", "X"),
    "i2i": ("X", "X"),
    "t2t": ("Y", "Y"),
}


def hamming(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"width mismatch: {a.shape} vs {b.shape}")
    return int(a.size - int(np.dot(a.astype(np.int64), b.astype(np.int64)))) // 2


class CodeIndex:
    """Immutable flat index of +-1 codes stored as packed bits."""

    def __init__(self, codes, ids=None):
        codes = np.asarray(codes)
        if codes.ndim != 2:
            raise ValueError("codes must be a 2-D matrix")
        self.width = codes.shape[1]
        self.packed = pack_codes(codes)
        self.packed.setflags(write=False)
        if ids is None:
            ids = np.arange(codes.shape[0], dtype=np.int64)
        ids = np.asarray(ids, dtype=np.int64)
        if ids.shape != (codes.shape[0],):
            raise ValueError(f"{ids.size} ids for {codes.shape[0]} codes")
        if np.unique(ids).size != ids.size:
            raise ValueError("ids must be unique")
        ids.setflags(write=False)
        self.ids = ids

    def __len__(self):
        return self.ids.size

    def distances(self, query):
        query = np.asarray(query)
        if query.ndim != 1 or query.size != self.width:
            raise ValueError(f"width mismatch: query has {query.size} bits, index has {self.width}")
        q = pack_codes(query[None, :])
        return np.bitwise_count(self.packed ^ q).sum(axis=1, dtype=np.int64)


@dataclass(frozen=True)
class RankedResult:
    ids: np.ndarray
    distances: np.ndarray
    relevant: np.ndarray | None = None

    def __len__(self):
        return self.ids.size


def rank(query, index, topk=None):
    """Order the index by Hamming distance to ``query``, ties by ascending id."""
    dist = index.distances(query)
    order = np.lexsort((index.ids, dist))
    if topk is not None:
        order = order[:max(int(topk), 0)]
    return RankedResult(index.ids[order], dist[order])


def query_codes(query_features, model, direction, space="database"):
    """Encode queries and map them into the space the database is compared in.

    With ``space="database"`` cross-modal queries are translated into the
    database's native code space. With ``space="query"`` queries stay
    native and the caller is expected to translate the database instead
    (see ``database_codes_for``).
    """
    qmod, dmod = DIRECTION_MODALITIES[direction]
    codes = encode(query_features, model, qmod)
    if qmod != dmod and space == "database":
        codes = translate(codes, model, "x_to_q2" if qmod == "X" else "y_to_q1")
    return codes


def database_codes_for(db_codes, model, direction, space="database"):
    qmod, dmod = DIRECTION_MODALITIES[direction]
    if qmod != dmod and space == "query":
        return translate(db_codes, model, "x_to_q2" if dmod == "X" else "y_to_q1")
    return np.asarray(db_codes)


def cross_modal_query(query_features, model, direction, index, topk=None):
    """Encode, translate and rank a batch of queries against a native-code index."""
    if direction not in DIRECTION_MODALITIES:
        raise ValueError(f"unknown direction {direction!r}")
    codes = query_codes(query_features, model, direction)
    if codes.shape[1] != index.width:
        raise ValueError(f"width mismatch: {direction} queries have {codes.shape[1]} bits, "
                         f"index has {index.width}")
    return [rank(c, index, topk) for c in codes]
