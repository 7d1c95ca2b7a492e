"""Out-of-sample encoding, cross-space translation and code file formats."""

from pathlib import Path

import numpy as np

from .hashfn import kernel_features, linear_scores

MODALITIES = ("X", "Y")
DIRECTIONS = ("x_to_q2", "y_to_q1")


def _sign_codes(x):
    return np.where(np.asarray(x) >= 0, 1, -1).astype(np.int8)


def encode(features, model, modality):
    """Native-length codes for unseen samples of one modality.

    A bit is +1 when Pr(+1|x) >= Pr(-1|x), i.e. when the linear KLR score is
    >= 0; the score is thresholded directly so that the result does not
    depend on rounding of the logistic near 0.5.
    """
    modality = str(modality).upper()
    if modality not in MODALITIES:
        raise ValueError(f"unknown modality {modality!r}")
    klr = model.klr_x if modality == "X" else model.klr_y
    features = np.asarray(features, dtype=np.float64)
    d = klr.anchors.anchors.shape[1]
    if features.size == 0 and features.shape[0] == 0:
        return np.zeros((0, klr.q), dtype=np.int8)
    if features.ndim != 2 or features.shape[1] != d:
        raise ValueError(f"dimension mismatch: modality {modality} expects {d} features, "
                         f"got shape {features.shape}")
    return _sign_codes(linear_scores(kernel_features(features, klr.anchors), klr))


def translate(codes, model, direction):
    """Map codes into the other modality's bit space: X codes via H2, Y codes via H1^T."""
    codes = np.atleast_2d(np.asarray(codes))
    H1, H2 = model.H
    if direction == "x_to_q2":
        M = H2
    elif direction == "y_to_q1":
        M = H1.T
    else:
        raise ValueError(f"unknown direction {direction!r}")
    if codes.shape[1] != M.shape[0]:
        raise ValueError(f"width mismatch: {direction} expects {M.shape[0]}-bit codes, got {codes.shape[1]}")
    return _sign_codes(codes.astype(np.float64) @ M)


def pack_codes(codes):
    """Pack +-1 codes into bytes: bit 1 <=> +1, rows padded to whole bytes, little bit order."""
    codes = np.asarray(codes)
    return np.packbits(codes > 0, axis=1, bitorder="little")


def unpack_codes(packed, width):
    packed = np.asarray(packed, dtype=np.uint8)
    bits = np.unpackbits(packed, axis=1, count=width, bitorder="little")
    return np.where(bits == 1, 1, -1).astype(np.int8)


def write_packed(path, codes):
    Path(path).write_bytes(pack_codes(codes).tobytes())


def read_packed(path, width):
    raw = np.frombuffer(Path(path).read_bytes(), dtype=np.uint8)
    row_bytes = (width + 7) // 8
    if raw.size % row_bytes:
        raise ValueError(f"{path}: size {raw.size} is not a multiple of {row_bytes} bytes per row")
    return unpack_codes(raw.reshape(-1, row_bytes), width)


def write_codes_csv(path, codes):
    codes = np.asarray(codes)
    with open(path, "w") as fh:
        for row in codes:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def read_codes_csv(path):
    from .dataset import read_matrix

    codes = read_matrix(path, dtype=int)
    if codes.size and not np.all(np.abs(codes) == 1):
        raise ValueError(f"{path}: code entries must be -1 or +1")
    return codes.astype(np.int8)
