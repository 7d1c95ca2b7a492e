import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtfh.retrieval import CodeIndex, cross_modal_query, hamming, rank

from conftest import make_model


def test_hamming_hand_values():
    a = np.array([1, 1, -1, -1])
    assert hamming(a, a) == 0
    assert hamming(np.ones(8), -np.ones(8)) == 8
    assert hamming(a, np.array([1, -1, -1, 1])) == 2
    with pytest.raises(ValueError):
        hamming(np.ones(3), np.ones(4))


codes = st.integers(1, 70).flatmap(
    lambda q: st.tuples(*[st.lists(st.sampled_from([-1, 1]), min_size=q, max_size=q)] * 3))


@settings(max_examples=200, deadline=None)
@given(codes)
def test_hamming_is_a_metric(triple):
    a, b, c = (np.array(v) for v in triple)
    assert hamming(a, b) == hamming(b, a)
    assert (hamming(a, b) == 0) == bool(np.all(a == b))
    assert hamming(a, c) <= hamming(a, b) + hamming(b, c)
    assert hamming(a, b) == int(np.sum(a != b))


def test_index_distances_match_hamming(rng):
    db = np.where(rng.random((40, 37)) < 0.5, -1, 1)
    idx = CodeIndex(db)
    q = db[3] * np.where(rng.random(37) < 0.2, -1, 1)
    np.testing.assert_array_equal(idx.distances(q), [hamming(q, row) for row in db])


def test_self_hit_and_total_tie(rng):
    db = np.where(rng.random((10, 16)) < 0.5, -1, 1)
    ids = rng.permutation(100)[:10]
    res = rank(db[4], CodeIndex(db, ids))
    assert res.ids[0] == ids[4] and res.distances[0] == 0
    same = CodeIndex(np.ones((6, 8)), [5, 3, 9, 0, 2, 7])
    assert rank(np.ones(8), same).ids.tolist() == [0, 2, 3, 5, 7, 9]


def test_rank_matches_full_sort_oracle(rng):
    for _ in range(20):
        n, q = 32, int(rng.integers(1, 40))
        db = np.where(rng.random((n, q)) < 0.5, -1, 1)
        ids = rng.permutation(1000)[:n]
        query = np.where(rng.random(q) < 0.5, -1, 1)
        oracle = sorted((int(np.sum(query != row)), int(i)) for row, i in zip(db, ids))
        res = rank(query, CodeIndex(db, ids))
        assert list(zip(res.distances.tolist(), res.ids.tolist())) == oracle
        top = rank(query, CodeIndex(db, ids), topk=5)
        assert len(top) == 5 and top.ids.tolist() == [i for _, i in oracle[:5]]


def test_index_guards():
    with pytest.raises(ValueError, match="unique"):
        CodeIndex(np.ones((2, 4)), [1, 1])
    with pytest.raises(ValueError, match="width"):
        rank(np.ones(5), CodeIndex(np.ones((2, 4))))


def test_cross_modal_query_guards_and_empty(rng):
    m = make_model(rng.standard_normal((4, 6)), rng.standard_normal((4, 6)))
    feats = rng.standard_normal((3, 2))
    assert [len(r) for r in cross_modal_query(feats, m, "i2t", CodeIndex(np.ones((0, 6))))] == [0, 0, 0]
    with pytest.raises(ValueError, match="width"):
        cross_modal_query(feats, m, "i2t", CodeIndex(np.ones((5, 4))))


def test_perfect_codes_put_counterpart_in_zero_block(small_model, small_split):
    from mtfh.encoder import encode, translate

    # "perfect" database: row i holds exactly the translated code of query i
    qx = small_split.query_x.features
    idx = CodeIndex(translate(encode(qx, small_model, "X"), small_model, "x_to_q2"))
    for i, res in enumerate(cross_modal_query(qx, small_model, "i2t", idx)):
        assert i in res.ids[res.distances == 0]
