"""Per-bit kernel logistic regression hash functions over an RBF anchor map."""

import os
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, log_expit

ANCHOR_SCHEMES = ("rnd", "km")
KMEANS_ITERS = 25
GAMMA_PAIRS = 500


@dataclass(frozen=True)
class AnchorSet:
    anchors: np.ndarray  # m x d
    scheme: str
    gamma: float

    @property
    def m(self):
        return self.anchors.shape[0]


@dataclass(frozen=True)
class KlrModel:
    anchors: AnchorSet
    weights: np.ndarray  # (m + 1) x q, last row is the bias
    eta: float

    @property
    def q(self):
        return self.weights.shape[1]


def estimate_gamma(features, seed, n_pairs=GAMMA_PAIRS):
    """1 / mean squared distance between random distinct training pairs (1.0 if degenerate)."""
    X = np.asarray(features, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        return 1.0
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, n_pairs)
    j = (i + rng.integers(1, n, n_pairs)) % n
    msd = float(np.mean(((X[i] - X[j]) ** 2).sum(1)))
    return 1.0 / msd if msd > 0 else 1.0


def sample_anchors(features, m, scheme="rnd", seed=0):
    X = np.asarray(features, dtype=np.float64)
    n = X.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"anchor count must satisfy 1 <= m <= n={n}, got {m}")
    if scheme == "rnd":
        idx = np.random.default_rng(seed).choice(n, size=m, replace=False)
        anchors = X[idx].copy()
    elif scheme == "km":
        from sklearn.cluster import KMeans

        km = KMeans(n_clusters=m, init="k-means++", n_init=1, max_iter=KMEANS_ITERS,
                    algorithm="lloyd", random_state=seed).fit(X)
        anchors = km.cluster_centers_.astype(np.float64)
    else:
        raise ValueError(f"unknown anchor scheme {scheme!r}")
    return AnchorSet(anchors, scheme, estimate_gamma(X, seed))


def kernel_features(X, a):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != a.anchors.shape[1]:
        raise ValueError(f"dimension mismatch: features have shape {X.shape}, "
                         f"anchors have dimension {a.anchors.shape[1]}")
    A = a.anchors
    d2 = (X * X).sum(1)[:, None] + (A * A).sum(1)[None, :] - 2.0 * X @ A.T
    K = np.empty((X.shape[0], A.shape[0] + 1))
    np.exp(-a.gamma * np.maximum(d2, 0.0), out=K[:, :-1])
    K[:, -1] = 1.0
    return K


def klr_loss_and_grad(w, K, b, eta):
    """Regularised logistic loss for one bit and its gradient.

    loss = sum_i log(1 + exp(-b_i K_i w)) + eta * ||w[:-1]||^2; the bias
    (last entry) is not penalised.
    """
    z = b * (K @ w)
    loss = -np.sum(log_expit(z)) + eta * np.dot(w[:-1], w[:-1])
    grad = -K.T @ (b * expit(-z))
    grad[:-1] += 2.0 * eta * w[:-1]
    return loss, grad


def _fit_bit(K, b, eta, gtol, maxiter):
    res = minimize(klr_loss_and_grad, np.zeros(K.shape[1]), args=(K, b, eta), jac=True,
                   method="L-BFGS-B", options={"gtol": gtol, "maxiter": maxiter})
    if not np.isfinite(res.fun):
        raise FloatingPointError("non-finite loss while fitting a hash function")
    return res.x


def train_klr(K, codes, eta=0.01, gtol=1e-6, maxiter=500, n_jobs=None):
    """Fit one weight column per code bit. Returns an (m + 1) x q weight matrix."""
    K = np.asarray(K, dtype=np.float64)
    codes = np.asarray(codes)
    if K.shape[0] != codes.shape[0]:
        raise ValueError(f"{K.shape[0]} kernel rows vs {codes.shape[0]} code rows")
    if eta < 0:
        raise ValueError("eta must be >= 0")
    targets = np.where(codes >= 0, 1.0, -1.0)
    q = targets.shape[1]
    n_jobs = n_jobs or int(os.environ.get("MTFH_THREADS", "1"))
    if n_jobs > 1 and q > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(n_jobs) as pool:
            cols = list(pool.map(lambda k: _fit_bit(K, targets[:, k], eta, gtol, maxiter), range(q)))
    else:
        cols = [_fit_bit(K, targets[:, k], eta, gtol, maxiter) for k in range(q)]
    return np.column_stack(cols) if cols else np.zeros((K.shape[1], 0))


def fit_hash_functions(features, codes, m=500, scheme="rnd", eta=0.01, seed=0):
    """Sample anchors (m capped at n) and fit KLR hash functions to ``codes``."""
    features = np.asarray(features, dtype=np.float64)
    anchors = sample_anchors(features, min(m, features.shape[0]), scheme, seed)
    W = train_klr(kernel_features(features, anchors), codes, eta)
    return KlrModel(anchors, W, float(eta))


def linear_scores(K, model):
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[1] != model.weights.shape[0]:
        raise ValueError(f"dimension mismatch: kernel features {K.shape} vs weights {model.weights.shape}")
    return K @ model.weights


def predict_bit_probabilities(K, model):
    """Pr(bit = +1 | x) for every sample and bit, kept strictly inside (0, 1)."""
    p = expit(linear_scores(K, model))
    return np.clip(p, np.finfo(float).tiny, 1.0 - np.finfo(float).epsneg)
