import numpy as np
import pytest

from mtfh.encoder import (encode, pack_codes, read_codes_csv, read_packed, translate, unpack_codes,
                          write_codes_csv, write_packed)
from mtfh.hashfn import fit_hash_functions, kernel_features

from conftest import make_model


def test_zero_weight_model_encodes_all_plus_one(rng):
    m = make_model(np.eye(3), np.eye(3), d1=2, d2=4)
    codes = encode(rng.standard_normal((5, 2)), m, "X")
    assert codes.shape == (5, 3) and np.all(codes == 1)
    assert encode(rng.standard_normal((2, 4)), m, "y").shape == (2, 3)


def test_empty_input_gives_empty_codes():
    m = make_model(np.eye(3), np.eye(3))
    assert encode(np.zeros((0, 2)), m, "X").shape == (0, 3)


def test_encode_guards(rng):
    m = make_model(np.eye(2), np.eye(2))
    with pytest.raises(ValueError, match="dimension"):
        encode(rng.standard_normal((3, 5)), m, "X")
    with pytest.raises(ValueError, match="modality"):
        encode(rng.standard_normal((3, 2)), m, "Z")


def test_encode_reproduces_separable_training_bits(rng):
    from mtfh.model import TrainedModel
    from mtfh.optimizer import CorrelationPair

    X = np.vstack([rng.normal(-3, 0.3, (15, 2)), rng.normal(3, 0.3, (15, 2))])
    codes = np.repeat([[1, -1, 1], [-1, 1, 1]], 15, axis=0)
    klr = fit_hash_functions(X, codes, m=10, eta=0.01, seed=2)
    m = TrainedModel(CorrelationPair(np.eye(3), np.eye(3)), klr, klr)
    np.testing.assert_array_equal(encode(X, m, "X"), codes)


def test_translate_identity_and_negation(rng):
    code = np.where(rng.random((6, 4)) < 0.5, -1, 1)
    eye = make_model(np.eye(4), np.eye(4))
    np.testing.assert_array_equal(translate(code, eye, "x_to_q2"), code)
    np.testing.assert_array_equal(translate(code, eye, "y_to_q1"), code)
    neg = make_model(np.eye(4), -np.eye(4))
    np.testing.assert_array_equal(translate(code, neg, "x_to_q2"), -code)


def test_translate_matches_explicit_product(rng):
    for _ in range(20):
        code = np.where(rng.random((1, 3)) < 0.5, -1, 1)
        H2 = rng.standard_normal((3, 5))
        H1 = rng.standard_normal((3, 5))
        m = make_model(H1, H2)
        prod = [sum(code[0, k] * H2[k, t] for k in range(3)) for t in range(5)]
        expect = [1 if v >= 0 else -1 for v in prod]
        assert translate(code, m, "x_to_q2")[0].tolist() == expect
        ycode = np.where(rng.random((1, 5)) < 0.5, -1, 1)
        prod = [sum(ycode[0, t] * H1[k, t] for t in range(5)) for k in range(3)]
        assert translate(ycode, m, "y_to_q1")[0].tolist() == [1 if v >= 0 else -1 for v in prod]


def test_translate_widths_and_scale_invariance(rng):
    H1, H2 = rng.standard_normal((4, 7)), rng.standard_normal((4, 7))
    m = make_model(H1, H2)
    cx = np.where(rng.random((10, 4)) < 0.5, -1, 1)
    cy = np.where(rng.random((10, 7)) < 0.5, -1, 1)
    assert translate(cx, m, "x_to_q2").shape == (10, 7)
    assert translate(cy, m, "y_to_q1").shape == (10, 4)
    scaled = make_model(2.5 * H1, 2.5 * H2)
    np.testing.assert_array_equal(translate(cx, scaled, "x_to_q2"), translate(cx, m, "x_to_q2"))
    with pytest.raises(ValueError, match="width"):
        translate(cy, m, "x_to_q2")


def test_pack_layout():
    codes = np.array([[1, -1, -1, -1, -1, -1, -1, -1, -1, 1]])
    packed = pack_codes(codes)
    # little bit order: first code bit is the lowest bit of byte 0
    assert packed.tolist() == [[0b00000001, 0b00000010]]
    np.testing.assert_array_equal(unpack_codes(packed, 10), codes)


def test_code_files_round_trip(tmp_path, rng):
    codes = np.where(rng.random((9, 13)) < 0.5, -1, 1).astype(np.int8)
    write_packed(tmp_path / "c.bin", codes)
    assert (tmp_path / "c.bin").stat().st_size == 9 * 2
    np.testing.assert_array_equal(read_packed(tmp_path / "c.bin", 13), codes)
    write_codes_csv(tmp_path / "c.csv", codes)
    np.testing.assert_array_equal(read_codes_csv(tmp_path / "c.csv"), codes)


def test_model_encode_widths(small_model, small_split):
    cx = encode(small_split.query_x.features, small_model, "X")
    cy = encode(small_split.query_y.features, small_model, "Y")
    assert cx.shape[1] == 8 and cy.shape[1] == 12
    assert set(np.unique(cx)) <= {-1, 1}
