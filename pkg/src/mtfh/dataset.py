"""Two-modality feature/label containers, CSV I/O, splitting and synthetic data."""

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class ModalityData:
    features: np.ndarray  # n x d
    labels: np.ndarray  # n x c, entries in {0, 1}

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels)
        if features.ndim != 2 or labels.ndim != 2:
            raise DataError("features and labels must be 2-D")
        if features.shape[0] != labels.shape[0]:
            raise DataError(
                f"row-count mismatch: {features.shape[0]} feature rows vs "
                f"{labels.shape[0]} label rows")
        if features.shape[0] < 1:
            raise DataError("a modality needs at least one sample")
        if not np.all(np.isfinite(features)):
            i, j = np.argwhere(~np.isfinite(features))[0]
            raise DataError(f"non-finite feature value at row {i + 1}, column {j + 1}")
        if not np.all((labels == 0) | (labels == 1)):
            raise DataError("labels must be 0/1")
        empty = np.flatnonzero(labels.sum(axis=1) == 0)
        if empty.size:
            raise DataError(f"empty label row {empty[0] + 1}")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels.astype(np.int8))

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    @property
    def c(self):
        return self.labels.shape[1]

    def take(self, idx):
        return ModalityData(self.features[idx], self.labels[idx])


@dataclass(frozen=True)
class DatasetSplit:
    train_x: ModalityData
    train_y: ModalityData
    query_x: ModalityData
    query_y: ModalityData
    paired: bool = True

    def __post_init__(self):
        if self.paired and self.train_x.n != self.train_y.n:
            raise DataError("paired split requires equal training sizes")


def read_matrix(path, dtype=float):
    """Parse a headerless numeric CSV. Errors carry the file name and 1-based row."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    rows = []
    width = None
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataError(f"{path}: ragged row {lineno} ({len(row)} cells, expected {width})")
            try:
                values = [dtype(cell) for cell in row]
            except ValueError:
                raise DataError(f"{path}: unparsable value in row {lineno}") from None
            for col, v in enumerate(values):
                if not math.isfinite(v):
                    raise DataError(f"{path}: non-finite value {row[col].strip()!r} at row {lineno}, column {col + 1}")
            rows.append(values)
    if not rows:
        return np.zeros((0, 0), dtype=np.float64 if dtype is float else np.int64)
    return np.array(rows, dtype=np.float64 if dtype is float else np.int64)


def write_matrix(path, mat, fmt=None):
    mat = np.asarray(mat)
    if fmt is None:
        fmt = "%d" if np.issubdtype(mat.dtype, np.integer) else "%.17g"
    with open(path, "w") as fh:
        if mat.size:
            np.savetxt(fh, mat, fmt=fmt, delimiter=",")


def load_modality(features_path, labels_path):
    features = read_matrix(features_path)
    labels = read_matrix(labels_path)
    if features.shape[0] != labels.shape[0]:
        raise DataError(
            f"row-count mismatch: {features_path} has {features.shape[0]} rows, "
            f"{labels_path} has {labels.shape[0]}")
    if labels.size and not np.all((labels == 0) | (labels == 1)):
        i = np.argwhere((labels != 0) & (labels != 1))[0][0]
        raise DataError(f"{labels_path}: label row {i + 1} has entries outside {{0,1}}")
    empty = np.flatnonzero(labels.sum(axis=1) == 0) if labels.size else []
    if len(empty):
        raise DataError(f"{labels_path}: empty label row {empty[0] + 1}")
    return ModalityData(features, labels.astype(np.int8))


def save_modality(data, features_path, labels_path):
    write_matrix(features_path, data.features)
    write_matrix(labels_path, data.labels.astype(np.int64))


def _n_query(n, query_fraction):
    if not 0 < query_fraction < 1:
        raise DataError(f"query_fraction must lie in (0, 1), got {query_fraction}")
    n_query = int(round(query_fraction * n))
    if n_query < 1:
        raise DataError(f"too few samples: {n} rows give no query rows at fraction {query_fraction}")
    if n_query >= n:
        raise DataError(f"too few samples: {n} rows leave an empty training set at fraction {query_fraction}")
    return n_query


def split_indices(n, query_fraction, rng):
    n_query = _n_query(n, query_fraction)
    perm = rng.permutation(n)
    return np.sort(perm[n_query:]), np.sort(perm[:n_query])


def split(x, y, query_fraction, seed, paired=True):
    """Hold out a query set. Paired data shares one permutation across modalities."""
    if paired and x.n != y.n:
        raise DataError(f"paired split needs equal row counts, got {x.n} and {y.n}")
    if x.c != y.c:
        raise DataError(f"category mismatch: {x.c} vs {y.c}")
    rng = np.random.default_rng(seed)
    train_ix, query_ix = split_indices(x.n, query_fraction, rng)
    if paired:
        train_iy, query_iy = train_ix, query_ix
    else:
        train_iy, query_iy = split_indices(y.n, query_fraction, rng)
    return DatasetSplit(x.take(train_ix), y.take(train_iy),
                        x.take(query_ix), y.take(query_iy), paired=paired)


def make_unpaired(data_split, modality, keep_fraction, seed):
    """Keep the first ceil(keep_fraction * n) rows of a seeded permutation of one training modality.

    Kept rows stay in their original order, so keep_fraction=1.0 is a no-op and
    smaller fractions select nested subsets for the same seed.
    """
    if not data_split.paired:
        raise DataError("split is already unpaired")
    if not 0 < keep_fraction <= 1:
        raise DataError(f"keep_fraction must lie in (0, 1], got {keep_fraction}")
    modality = modality.upper()
    if modality not in ("X", "Y"):
        raise DataError(f"unknown modality {modality!r}")
    if keep_fraction == 1.0:
        return data_split
    source = data_split.train_x if modality == "X" else data_split.train_y
    perm = np.random.default_rng(seed).permutation(source.n)
    kept = np.sort(perm[:math.ceil(keep_fraction * source.n - 1e-9)])
    field = "train_x" if modality == "X" else "train_y"
    return replace(data_split, paired=False, **{field: source.take(kept)})


def synth_multimodal(n_per_class, c, d1, d2, class_separation, seed):
    """Paired Gaussian-cluster data: row i of both modalities has the same class.

    Class centres are drawn from N(0, class_separation^2 I) independently per
    modality; samples add unit-variance isotropic noise. Rows are shuffled.
    """
    for name, v in (("n_per_class", n_per_class), ("c", c), ("d1", d1), ("d2", d2)):
        if v < 1:
            raise DataError(f"{name} must be >= 1, got {v}")
    if class_separation < 0:
        raise DataError("class_separation must be >= 0")
    rng = np.random.default_rng(seed)
    centres_x = class_separation * rng.standard_normal((c, d1))
    centres_y = class_separation * rng.standard_normal((c, d2))
    classes = rng.permutation(np.repeat(np.arange(c), n_per_class))
    n = classes.size
    fx = centres_x[classes] + rng.standard_normal((n, d1))
    fy = centres_y[classes] + rng.standard_normal((n, d2))
    labels = np.zeros((n, c), dtype=np.int8)
    labels[np.arange(n), classes] = 1
    return ModalityData(fx, labels), ModalityData(fy, labels.copy())
