import itertools

import numpy as np
import pytest

from mtfh.optimizer import CorrelationPair, OptimizerConfig, TrainState


def reference_objective(S, U, V, Uhat, Vhat, H1, H2, alpha, beta, lam, q1, q2):
    """Term-by-term evaluation with einsum, independent of the package's matrix code."""
    r1 = S - np.einsum("ik,jk->ij", U, Uhat) / q1
    r2 = S - np.einsum("ik,jk->ij", Vhat, V) / q2
    r3 = Uhat - np.einsum("jt,kt->jk", V, H1)
    r4 = Vhat - np.einsum("ik,kt->it", U, H2)
    return (alpha * np.einsum("ij,ij->", r1, r1)
            + (1 - alpha) * np.einsum("ij,ij->", r2, r2)
            + beta * (np.einsum("ij,ij->", r3, r3) + np.einsum("ij,ij->", r4, r4))
            + lam * (np.einsum("ij,ij->", H1, H1) + np.einsum("ij,ij->", H2, H2)))


def state_objective(S, st, cfg):
    return reference_objective(S, st.U, st.V, st.Uhat, st.Vhat, st.H.H1, st.H.H2,
                               cfg.alpha, cfg.beta, cfg.lam, cfg.q1, cfg.q2)


def random_codes(rng, shape):
    return np.where(rng.random(shape) < 0.5, -1.0, 1.0)


def random_instance(rng, n1, n2, q1, q2, alpha=None, beta=None, lam=None):
    if rng.random() < 0.5:
        S = (rng.random((n1, n2)) < 0.4).astype(float)
    else:
        S = rng.random((n1, n2))
    cfg = OptimizerConfig(
        q1=q1, q2=q2,
        alpha=float(rng.uniform(0.05, 0.95)) if alpha is None else alpha,
        beta=float(rng.uniform(0.01, 2.0)) if beta is None else beta,
        lam=float(rng.uniform(0.01, 1.0)) if lam is None else lam,
        rounds=1, scheme="dcc")
    st = TrainState(U=random_codes(rng, (n1, q1)), V=random_codes(rng, (n2, q2)),
                    Uhat=random_codes(rng, (n2, q1)), Vhat=random_codes(rng, (n1, q2)),
                    H=CorrelationPair(rng.standard_normal((q1, q2)), rng.standard_normal((q1, q2))))
    return S, st, cfg


def all_sign_vectors(n):
    return np.array(list(itertools.product((-1.0, 1.0), repeat=n)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_split():
    from mtfh.dataset import split, synth_multimodal

    x, y = synth_multimodal(30, 3, 5, 7, 3.0, seed=21)
    return split(x, y, 0.1, seed=21)


@pytest.fixture(scope="session")
def small_model(small_split):
    from mtfh.pipeline import RunConfig, fit_model

    model, _ = fit_model(small_split.train_x, small_split.train_y,
                         RunConfig(q1=8, q2=12, anchors=20, max_iter=5, seed=4))
    return model


def make_model(H1, H2, d1=2, d2=2, wx=None, wy=None):
    """Hand-built TrainedModel with one anchor per modality."""
    from mtfh.hashfn import AnchorSet, KlrModel
    from mtfh.model import TrainedModel
    from mtfh.optimizer import CorrelationPair

    H1, H2 = np.asarray(H1, float), np.asarray(H2, float)
    q1, q2 = H1.shape
    wx = np.zeros((2, q1)) if wx is None else wx
    wy = np.zeros((2, q2)) if wy is None else wy
    return TrainedModel(CorrelationPair(H1, H2),
                        KlrModel(AnchorSet(np.zeros((1, d1)), "rnd", 1.0), wx, 0.01),
                        KlrModel(AnchorSet(np.zeros((1, d2)), "rnd", 1.0), wy, 0.01))
