"""Command line entry point: synth, train, encode, query, eval, bench."""

import argparse
import csv
import json
import logging
import os
import sys
from collections import defaultdict
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import encoder
from .dataset import DataError, DatasetSplit, load_modality, make_unpaired, read_matrix, save_modality, split, synth_multimodal
from .evaluation import NoEvaluableQueries, RelevanceJudge, average_precision, mean_curve, mean_of, precision_recall_curve, recall_at_k, topk_precision
from .model import ModelFormatError, load_model, save_model
from .pipeline import RunConfig, StageError, bench, fit_model
from .retrieval import DIRECTION_MODALITIES, CodeIndex, database_codes_for, query_codes, rank

log = logging.getLogger("mtfh")

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE = 0, 1, 2
SPLIT_FILES = {
    "train_x": ("train_x_features.csv", "train_x_labels.csv"),
    "train_y": ("train_y_features.csv", "train_y_labels.csv"),
    "query_x": ("query_x_features.csv", "query_x_labels.csv"),
    "query_y": ("query_y_features.csv", "query_y_labels.csv"),
}


def _ks(text):
    try:
        ks = [int(k) for k in text.split(",") if k.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if any(k < 1 for k in ks):
        raise argparse.ArgumentTypeError("K values must be >= 1")
    return ks


def _add_run_options(p):
    g = p.add_argument_group("model")
    g.add_argument("--q1", type=int, default=16, help="code length of modality X")
    g.add_argument("--q2", type=int, default=16, help="code length of modality Y")
    g.add_argument("--alpha", type=float, default=0.5)
    g.add_argument("--beta", type=float, default=0.1)
    g.add_argument("--lambda", dest="lam", type=float, default=0.1)
    g.add_argument("--rounds", type=int, default=3, help="E-RCD ensemble rounds (odd)")
    g.add_argument("--max-iter", type=int, default=20)
    g.add_argument("--tol", type=float, default=1e-4)
    g.add_argument("--update", choices=("ercd", "dcc"), default="ercd",
                   help="code update scheme")
    g.add_argument("--anchors", type=int, default=500)
    g.add_argument("--scheme", choices=("rnd", "km"), default="rnd", help="anchor sampling")
    g.add_argument("--eta", type=float, default=0.01)
    g.add_argument("--affinity", choices=("inner", "rbf"), default="inner")
    g.add_argument("--sigma", type=float, default=None)
    g.add_argument("--seed", type=int, default=0)


def _run_config(args):
    return RunConfig(q1=args.q1, q2=args.q2, alpha=args.alpha, beta=args.beta, lam=args.lam,
                     rounds=args.rounds, max_iter=args.max_iter, tol=args.tol, scheme=args.update,
                     anchors=args.anchors, anchor_scheme=args.scheme, eta=args.eta,
                     affinity=args.affinity, sigma=args.sigma, seed=args.seed)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_synth(args):
    x, y = synth_multimodal(args.n_per_class, args.classes, args.d1, args.d2, args.separation, args.seed)
    sp = split(x, y, args.query_fraction, args.seed)
    if args.unpair:
        sp = make_unpaired(sp, args.unpair, args.keep, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, (fpath, lpath) in SPLIT_FILES.items():
        save_modality(getattr(sp, name), out / fpath, out / lpath)
    print(f"wrote train {sp.train_x.n}/{sp.train_y.n}, query {sp.query_x.n}/{sp.query_y.n} rows to {out}")
    return EXIT_OK


def load_split_dir(path):
    path = Path(path)
    parts = {name: load_modality(path / f, path / l) for name, (f, l) in SPLIT_FILES.items()}
    return DatasetSplit(**parts, paired=parts["train_x"].n == parts["train_y"].n)


def cmd_train(args):
    train_x = load_modality(args.features_x, args.labels_x)
    train_y = load_modality(args.features_y, args.labels_y)
    cfg = _run_config(args)
    model, st = fit_model(train_x, train_y, cfg)
    save_model(model, args.out)
    if args.trace:
        _write_rows(args.trace, ["iteration", "objective"],
                    [(i + 1, repr(v)) for i, v in enumerate(st.objective_trace)])
    print(f"final objective {st.objective_trace[-1]:.6f} after {st.n_iter} iterations")
    print(f"model written to {args.out} (q1={model.q1}, q2={model.q2})")
    return EXIT_OK


def _read_features(path):
    return read_matrix(path)


def cmd_encode(args):
    model = load_model(args.model)
    feats = _read_features(args.features)
    if feats.size == 0:
        width = model.q1 if args.modality.upper() == "X" else model.q2
        codes = np.zeros((0, width), dtype=np.int8)
    else:
        codes = encoder.encode(feats, model, args.modality)
    if args.packed:
        encoder.write_packed(args.out, codes)
    else:
        encoder.write_codes_csv(args.out, codes)
    print(f"encoded {codes.shape[0]} samples into {codes.shape[1]}-bit codes")
    return EXIT_OK


def _read_ids(path, n):
    if path is None:
        return np.arange(n)
    ids = read_matrix(path, dtype=int)
    if ids.size == 0:
        return np.zeros(0, dtype=np.int64)
    if ids.shape[1] != 1:
        raise DataError(f"{path}: id sidecar must have one column")
    return ids[:, 0]


def cmd_query(args):
    model = load_model(args.model)
    qmod, dmod = DIRECTION_MODALITIES[args.direction]
    db_width = model.q1 if dmod == "X" else model.q2
    if args.packed:
        db = encoder.read_packed(args.db_codes, db_width)
    else:
        db = encoder.read_codes_csv(args.db_codes)
        if db.size == 0:
            db = np.zeros((0, db_width), dtype=np.int8)
    if db.shape[1] != db_width:
        raise DataError(f"database codes have {db.shape[1]} bits; {args.direction} needs {db_width}")
    index = CodeIndex(database_codes_for(db, model, args.direction, args.space), _read_ids(args.db_ids, db.shape[0]))
    feats = _read_features(args.features)
    rows = []
    if feats.size:
        for qi, code in enumerate(query_codes(feats, model, args.direction, args.space)):
            res = rank(code, index, args.topk)
            rows.extend((qi, r + 1, int(i), int(d)) for r, (i, d) in enumerate(zip(res.ids, res.distances)))
    _write_rows(args.out, ["query_id", "rank", "db_id", "distance"], rows)
    print(f"ranked {len(feats)} queries against {len(index)} database codes")
    return EXIT_OK


def read_ranking(path):
    """Group a ranking CSV into {query_id: db_ids in rank order}."""
    groups = defaultdict(list)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"query_id", "rank", "db_id"} <= set(reader.fieldnames):
            raise DataError(f"{path}: expected columns query_id, rank, db_id, distance")
        for row in reader:
            groups[int(row["query_id"])].append((int(row["rank"]), int(row["db_id"])))
    if not groups:
        raise DataError(f"{path}: ranking file is empty")
    return {q: np.array([d for _, d in sorted(v)], dtype=np.int64) for q, v in sorted(groups.items())}


def _labels(path):
    labels = read_matrix(path, dtype=int)
    if labels.size == 0:
        raise DataError(f"{path}: no labels")
    return labels


def cmd_eval(args):
    rankings = read_ranking(args.ranking)
    judge = RelevanceJudge(_labels(args.query_labels), _labels(args.db_labels))
    nq, ndb = judge.query_labels.shape[0], judge.db_labels.shape[0]
    for q, ids in rankings.items():
        if not 0 <= q < nq:
            raise DataError(f"query id {q} outside query labels (0..{nq - 1})")
        if ids.size and (ids.min() < 0 or ids.max() >= ndb):
            raise DataError(f"query {q}: db id outside database labels (0..{ndb - 1})")
    flags = {q: judge.flags(q, ids) for q, ids in rankings.items()}
    metrics = set(args.metrics)
    rows = []
    summary = {"queries": len(flags)}
    if "map" in metrics:
        aps = [average_precision(f, args.cutoff,
                                 judge.total_relevant(q) if args.ap_mode == "total" else None)
               for q, f in flags.items()]
        summary["map"] = mean_of(aps)
        summary["evaluated_queries"] = sum(a is not None for a in aps)
        summary["map_cutoff"] = args.cutoff
        rows.append(("map", args.cutoff if args.cutoff else "", repr(summary["map"])))
    if "topk" in metrics:
        prec = np.mean([topk_precision(f, args.ks) for f in flags.values()], axis=0)
        summary["topk_precision"] = {str(k): float(p) for k, p in zip(args.ks, prec)}
        rows.extend(("topk_precision", k, repr(float(p))) for k, p in zip(args.ks, prec))
    if "recall" in metrics:
        rec = [recall_at_k(f, args.ks, judge.total_relevant(q)) for q, f in flags.items()]
        rec = [r for r in rec if r[0] is not None]
        if not rec:
            raise NoEvaluableQueries("no evaluable queries")
        rec = np.mean(rec, axis=0)
        summary["recall"] = {str(k): float(r) for k, r in zip(args.ks, rec)}
        rows.extend(("recall", k, repr(float(r))) for k, r in zip(args.ks, rec))
    out = Path(args.out)
    if "pr" in metrics:
        curves = [precision_recall_curve(f, judge.total_relevant(q)) for q, f in flags.items()
                  if judge.total_relevant(q) > 0]
        lengths = {c.shape[0] for c in curves}
        if len(lengths) != 1:
            raise DataError("precision-recall curves need equal-length rankings for every query")
        curve = mean_curve(curves)
        pr_path = out.with_name(out.name + "_pr.csv")
        _write_rows(pr_path, ["prefix", "recall", "precision"],
                    [(i + 1, repr(float(r)), repr(float(p))) for i, (r, p) in enumerate(curve)])
        summary["pr_curve"] = str(pr_path)
    _write_rows(out.with_name(out.name + ".csv"), ["metric", "k", "value"], rows)
    _write_json(out.with_name(out.name + ".json"), summary)
    for key in ("map", "topk_precision", "recall"):
        if key in summary:
            print(f"{key}: {summary[key]}")
    return EXIT_OK


def cmd_bench(args):
    data = load_split_dir(args.data)
    summary, per_trial = bench(data, _run_config(args), tuple(args.schemes), args.trials)
    _write_rows(args.out, ["scheme", "task", "trials", "mean", "max_min", "std"],
                [(r["scheme"], r["task"], r["trials"], repr(r["mean"]), repr(r["max_min"]), repr(r["std"]))
                 for r in summary])
    if args.trials_out:
        _write_rows(args.trials_out, ["scheme", "task", "trial", "seed", "map"],
                    [(r["scheme"], r["task"], r["trial"], r["seed"], repr(r["map"])) for r in per_trial])
    for r in summary:
        print(f"{r['scheme']:5s} {r['task']}: mean {r['mean']:.4f}  max-min {r['max_min']:.4f}  std {r['std']:.4f}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="mtfh", description="Cross-modal hashing with unequal code lengths.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic two-modality dataset split")
    p.add_argument("--n-per-class", type=int, default=100)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--d1", type=int, default=20)
    p.add_argument("--d2", type=int, default=30)
    p.add_argument("--separation", type=float, default=2.0)
    p.add_argument("--query-fraction", type=float, default=0.05)
    p.add_argument("--unpair", choices=("x", "y"), default=None, help="drop training rows of one modality")
    p.add_argument("--keep", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="learn codes and hash functions, write a model file")
    for name in ("features-x", "features-y", "labels-x", "labels-y"):
        p.add_argument(f"--{name}", required=True)
    _add_run_options(p)
    p.add_argument("--out", required=True, help="model file")
    p.add_argument("--trace", default=None, help="optional CSV of the objective per iteration")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("encode", help="encode features with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--modality", choices=("x", "y", "X", "Y"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--packed", action="store_true", help="write packed bits instead of CSV")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("query", help="rank database codes for each query")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True, help="query features")
    p.add_argument("--direction", choices=tuple(DIRECTION_MODALITIES), required=True)
    p.add_argument("--db-codes", required=True)
    p.add_argument("--db-ids", default=None, help="one id per database row (default: row index)")
    p.add_argument("--packed", action="store_true", help="database codes are packed bits")
    p.add_argument("--topk", type=int, default=None)
    p.add_argument("--space", choices=("database", "query"), default="database",
                   help="code space cross-modal comparisons happen in")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="compute retrieval metrics from a ranking file")
    p.add_argument("--ranking", required=True)
    p.add_argument("--query-labels", required=True)
    p.add_argument("--db-labels", required=True)
    p.add_argument("--metrics", type=lambda s: s.split(","), default=["map", "topk", "recall"],
                   help="comma-separated subset of map,topk,recall,pr")
    p.add_argument("--ks", type=_ks, default=[1, 10, 50, 100])
    p.add_argument("--cutoff", type=int, default=None, help="mAP@K cutoff (default: full list)")
    p.add_argument("--ap-mode", choices=("window", "total"), default="window")
    p.add_argument("--out", required=True, help="output prefix for .csv and .json")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="compare dcc and ercd stability over seeds")
    p.add_argument("--data", required=True, help="directory written by `mtfh synth`")
    _add_run_options(p)
    p.add_argument("--schemes", type=lambda s: s.split(","), default=["dcc", "ercd"])
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--out", required=True, help="summary CSV")
    p.add_argument("--trials-out", default=None, help="optional per-trial CSV")
    p.set_defaults(func=cmd_bench)
    return parser


def _thread_limit():
    n = os.environ.get("MTFH_THREADS")
    if not n:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(n))


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "metrics", None):
        unknown = set(args.metrics) - {"map", "topk", "recall", "pr"}
        if unknown:
            parser.error(f"unknown metrics: {', '.join(sorted(unknown))}")
    if getattr(args, "schemes", None):
        unknown = set(args.schemes) - {"dcc", "ercd"}
        if unknown:
            parser.error(f"unknown schemes: {', '.join(sorted(unknown))}")
    try:
        with _thread_limit():
            return args.func(args)
    except StageError as exc:
        print(f"error in {exc}", file=sys.stderr)
        return EXIT_USAGE if isinstance(exc.__cause__, ValueError) else EXIT_INTERNAL
    except (FileNotFoundError, DataError, ModelFormatError, NoEvaluableQueries, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
