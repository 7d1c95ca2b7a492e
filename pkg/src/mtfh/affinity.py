"""Supervised cross-modal affinity between the two training label sets."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AffinityMatrix:
    S: np.ndarray  # n1 x n2, entries in [0, 1]
    kind: str = "inner"
    sigma: float | None = None


def _check(Lx, Ly):
    Lx = np.asarray(Lx, dtype=np.float64)
    Ly = np.asarray(Ly, dtype=np.float64)
    if Lx.ndim != 2 or Ly.ndim != 2:
        raise ValueError("label matrices must be 2-D")
    if Lx.shape[1] != Ly.shape[1]:
        raise ValueError(f"category-count mismatch: {Lx.shape[1]} vs {Ly.shape[1]}")
    return Lx, Ly


def affinity_inner(Lx, Ly):
    """Cosine similarity of multi-hot label rows; the 0/1 agreement matrix for one-hot labels."""
    Lx, Ly = _check(Lx, Ly)
    nx = np.linalg.norm(Lx, axis=1, keepdims=True)
    ny = np.linalg.norm(Ly, axis=1, keepdims=True)
    if np.any(nx == 0) or np.any(ny == 0):
        raise ValueError("label rows must be non-empty")
    S = (Lx / nx) @ (Ly / ny).T
    np.clip(S, 0.0, 1.0, out=S)
    return AffinityMatrix(S, "inner")


def _sq_dists(Lx, Ly):
    d = (Lx * Lx).sum(1)[:, None] + (Ly * Ly).sum(1)[None, :] - 2.0 * Lx @ Ly.T
    return np.maximum(d, 0.0)


def default_sigma(Lx, Ly, n_pairs=1000, seed=0):
    """Mean squared label distance over a seeded sample of cross-modal pairs (1.0 if degenerate)."""
    Lx, Ly = _check(Lx, Ly)
    rng = np.random.default_rng(seed)
    i = rng.integers(0, Lx.shape[0], n_pairs)
    j = rng.integers(0, Ly.shape[0], n_pairs)
    sigma = float(np.mean(((Lx[i] - Ly[j]) ** 2).sum(1)))
    return sigma if sigma > 0 else 1.0


def affinity_rbf(Lx, Ly, sigma=None, seed=0):
    """exp(-||Lx_i - Ly_j||^2 / sigma); sigma defaults to ``default_sigma``."""
    Lx, Ly = _check(Lx, Ly)
    if sigma is None:
        sigma = default_sigma(Lx, Ly, seed=seed)
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    S = np.exp(-_sq_dists(Lx, Ly) / sigma)
    return AffinityMatrix(S, "rbf", float(sigma))


def build_affinity(Lx, Ly, kind="inner", sigma=None, seed=0):
    if kind == "inner":
        return affinity_inner(Lx, Ly)
    if kind == "rbf":
        return affinity_rbf(Lx, Ly, sigma, seed=seed)
    raise ValueError(f"unknown affinity kind {kind!r}")
