"""End-to-end training and evaluation used by the CLI and the stability bench."""

import logging
from dataclasses import asdict, dataclass, replace

import numpy as np

from .affinity import build_affinity
from .encoder import encode
from .evaluation import RelevanceJudge, mean_ap
from .hashfn import fit_hash_functions
from .model import TrainedModel
from .optimizer import OptimizerConfig, train_codes
from .retrieval import DIRECTION_MODALITIES, CodeIndex, database_codes_for, query_codes, rank

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    q1: int = 16
    q2: int = 16
    alpha: float = 0.5
    beta: float = 0.1
    lam: float = 0.1
    rounds: int = 3
    max_iter: int = 20
    tol: float = 1e-4
    scheme: str = "ercd"
    anchors: int = 500
    anchor_scheme: str = "rnd"
    eta: float = 0.01
    affinity: str = "inner"
    sigma: float | None = None
    seed: int = 0

    def optimizer_config(self):
        return OptimizerConfig(q1=self.q1, q2=self.q2, alpha=self.alpha, beta=self.beta,
                               lam=self.lam, rounds=self.rounds, max_iter=self.max_iter,
                               tol=self.tol, seed=self.seed, scheme=self.scheme)


class StageError(RuntimeError):
    def __init__(self, stage, exc):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.__cause__ = exc


def fit_model(train_x, train_y, cfg):
    """Affinity -> discrete codes -> per-modality KLR hash functions.

    Returns the model and the optimiser's final state.
    """
    try:
        aff = build_affinity(train_x.labels, train_y.labels, cfg.affinity, cfg.sigma, seed=cfg.seed)
    except ValueError as exc:
        raise StageError("affinity", exc) from exc
    try:
        st = train_codes(aff, cfg.optimizer_config())
    except (ValueError, FloatingPointError) as exc:
        raise StageError("optimizer", exc) from exc
    log.info("codes learned in %d iterations, objective %.6g", st.n_iter, st.objective_trace[-1])
    try:
        klr_x = fit_hash_functions(train_x.features, st.U, cfg.anchors, cfg.anchor_scheme, cfg.eta, cfg.seed)
        klr_y = fit_hash_functions(train_y.features, st.V, cfg.anchors, cfg.anchor_scheme, cfg.eta, cfg.seed + 1)
    except (ValueError, FloatingPointError) as exc:
        raise StageError("hash functions", exc) from exc
    meta = {"config": asdict(cfg), "affinity_sigma": aff.sigma,
            "iterations": st.n_iter, "final_objective": st.objective_trace[-1]}
    return TrainedModel(st.H, klr_x, klr_y, meta), st


def retrieve(model, query_features, db_features, direction, topk=None, space="database"):
    """Rank an encoded database against encoded queries for one direction."""
    _, dmod = DIRECTION_MODALITIES[direction]
    db = database_codes_for(encode(db_features, model, dmod), model, direction, space)
    index = CodeIndex(db)
    return [rank(c, index, topk) for c in query_codes(query_features, model, direction, space)]


def evaluate_split(model, data_split, directions=("i2t", "t2i"), cutoff=None, space="database"):
    """mAP per direction with the training set as retrieval database."""
    sides = {"X": (data_split.query_x, data_split.train_x), "Y": (data_split.query_y, data_split.train_y)}
    out = {}
    for direction in directions:
        qmod, dmod = DIRECTION_MODALITIES[direction]
        query, db = sides[qmod][0], sides[dmod][1]
        rankings = retrieve(model, query.features, db.features, direction, cutoff, space)
        judge = RelevanceJudge(query.labels, db.labels)
        out[direction] = mean_ap(rankings, judge, cutoff)
    return out


def class_prior_baseline(query_labels, db_labels):
    """Expected AP of a random ranking: mean fraction of relevant database items per query."""
    judge = RelevanceJudge(query_labels, db_labels)
    fr = [judge.total_relevant(i) / judge.db_labels.shape[0] for i in range(judge.query_labels.shape[0])]
    return float(np.mean(fr))


def bench(data_split, cfg, schemes=("dcc", "ercd"), trials=10, directions=("i2t", "t2i")):
    """Repeat training over ``trials`` seeds per scheme and summarise mAP spread.

    Trial t uses seed ``cfg.seed + t``. dcc runs a single cyclic sweep per
    matrix (rounds=1). Returns (summary rows, per-trial rows).
    """
    if trials < 2:
        raise ValueError("trials must be >= 2")
    per_trial = []
    summary = []
    for scheme in schemes:
        scores = {d: [] for d in directions}
        for t in range(trials):
            run = replace(cfg, scheme=scheme, seed=cfg.seed + t,
                          rounds=1 if scheme == "dcc" else cfg.rounds)
            model, _ = fit_model(data_split.train_x, data_split.train_y, run)
            maps = evaluate_split(model, data_split, directions)
            for d in directions:
                scores[d].append(maps[d])
                per_trial.append({"scheme": scheme, "task": d, "trial": t, "seed": run.seed, "map": maps[d]})
        for d in directions:
            s = np.array(scores[d])
            summary.append({"scheme": scheme, "task": d, "trials": trials, "mean": float(s.mean()),
                            "max_min": float(s.max() - s.min()), "std": float(s.std())})
    return summary, per_trial
