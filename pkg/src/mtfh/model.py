"""TrainedModel and its single-file binary serialisation.

Layout (all integers little-endian)::

    b"MTFH"                     magic
    u32                         format version
    u64 + bytes                 JSON metadata (UTF-8, sorted keys)
    6 x (u64 rows, u64 cols, rows*cols f64 row-major)
        H1, H2, anchors_x, anchors_y, weights_x, weights_y
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .hashfn import AnchorSet, KlrModel
from .optimizer import CorrelationPair

MAGIC = b"MTFH"
FORMAT_VERSION = 1
MATRIX_ORDER = ("H1", "H2", "anchors_x", "anchors_y", "weights_x", "weights_y")


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TrainedModel:
    H: CorrelationPair
    klr_x: KlrModel
    klr_y: KlrModel
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        q1, q2 = self.H.H1.shape
        if self.H.H2.shape != (q1, q2):
            raise ModelFormatError("H1 and H2 shapes differ")
        if self.klr_x.q != q1 or self.klr_y.q != q2:
            raise ModelFormatError(
                f"hash function widths ({self.klr_x.q}, {self.klr_y.q}) do not match H ({q1}, {q2})")

    @property
    def q1(self):
        return self.H.H1.shape[0]

    @property
    def q2(self):
        return self.H.H1.shape[1]

    @property
    def d1(self):
        return self.klr_x.anchors.anchors.shape[1]

    @property
    def d2(self):
        return self.klr_y.anchors.anchors.shape[1]

    def header(self):
        meta = dict(self.metadata)
        meta.update({
            "q1": self.q1, "q2": self.q2, "d1": self.d1, "d2": self.d2,
            "anchors_x": self.klr_x.anchors.m, "anchors_y": self.klr_y.anchors.m,
            "gamma_x": self.klr_x.anchors.gamma, "gamma_y": self.klr_y.anchors.gamma,
            "anchor_scheme_x": self.klr_x.anchors.scheme,
            "anchor_scheme_y": self.klr_y.anchors.scheme,
            "eta_x": self.klr_x.eta, "eta_y": self.klr_y.eta,
        })
        return meta


def _pack_matrix(mat):
    mat = np.ascontiguousarray(mat, dtype="<f8")
    rows, cols = mat.shape
    return struct.pack("<QQ", rows, cols) + mat.tobytes()


def dumps(model):
    meta = json.dumps(model.header(), sort_keys=True, separators=(",", ":")).encode()
    parts = [MAGIC, struct.pack("<I", FORMAT_VERSION), struct.pack("<Q", len(meta)), meta]
    mats = (model.H.H1, model.H.H2, model.klr_x.anchors.anchors, model.klr_y.anchors.anchors,
            model.klr_x.weights, model.klr_y.weights)
    parts.extend(_pack_matrix(m) for m in mats)
    return b"".join(parts)


def loads(buf):
    view = memoryview(buf)
    if bytes(view[:4]) != MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    pos = 4

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise ModelFormatError("truncated model file")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    (version,) = struct.unpack("<I", take(4))
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format version {version}")
    (meta_len,) = struct.unpack("<Q", take(8))
    meta = json.loads(bytes(take(meta_len)).decode())
    mats = {}
    for name in MATRIX_ORDER:
        rows, cols = struct.unpack("<QQ", take(16))
        mats[name] = np.frombuffer(take(8 * rows * cols), dtype="<f8").reshape(rows, cols).astype(np.float64)
    if pos != len(view):
        raise ModelFormatError("trailing bytes after model data")

    for side in ("x", "y"):
        a, w = mats[f"anchors_{side}"], mats[f"weights_{side}"]
        if w.shape[0] != a.shape[0] + 1:
            raise ModelFormatError(f"weights_{side} rows {w.shape[0]} != anchors_{side} rows + 1")
    q1, q2 = meta["q1"], meta["q2"]
    if mats["H1"].shape != (q1, q2) or mats["weights_x"].shape[1] != q1 or mats["weights_y"].shape[1] != q2:
        raise ModelFormatError("matrix shapes disagree with declared code lengths")

    klr_x = KlrModel(AnchorSet(mats["anchors_x"], meta["anchor_scheme_x"], meta["gamma_x"]),
                     mats["weights_x"], meta["eta_x"])
    klr_y = KlrModel(AnchorSet(mats["anchors_y"], meta["anchor_scheme_y"], meta["gamma_y"]),
                     mats["weights_y"], meta["eta_y"])
    return TrainedModel(CorrelationPair(mats["H1"], mats["H2"]), klr_x, klr_y, meta)


def save_model(model, path):
    with open(path, "wb") as fh:
        fh.write(dumps(model))


def load_model(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
