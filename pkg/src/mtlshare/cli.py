"""Command-line interface.

Exit codes: 0 success, 1 argument or config error, 2 numerical failure,
3 a verified property was violated (``verify`` only).
"""

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analysis import covariance_similarity_score, validation_metric
from .closed_form import fit_linear_mtl, stl_solve
from .exceptions import ArgumentError, NumericalFailure
from .harness import ExperimentResult, config_from_dict, load_config, render, run
from .model import forward, init_model
from .tasks import (TaskDataset, disjoint_boost_sets, gen_linear_task, gen_logistic_task,
                    gen_relu_task, make_covariance, split)
from .trainer import TrainConfig, train_aligned, train_best_of
from .weighting import svd_reweight, uncertainty_weights, uniform_weights

EXIT_OK, EXIT_ARGS, EXIT_NUMERIC, EXIT_VIOLATION = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ArgumentError(message)


def _emit(doc, out=None):
    text = json.dumps(doc, indent=1, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    print(text)


def _load_tasks(paths):
    try:
        return [TaskDataset.load(p) for p in paths]
    except (FileNotFoundError, ValueError, KeyError, IndexError) as exc:
        if isinstance(exc, ArgumentError):
            raise
        raise ArgumentError(f"cannot read dataset: {exc}") from exc


def _train_config(args, **overrides):
    doc = {"learning_rate": args.lr, "epochs": args.epochs, "batch_size": args.batch_size,
           "seed": args.seed}
    doc.update(overrides)
    return TrainConfig(**doc)


def _metrics(model, tasks):
    out = []
    for i, t in enumerate(tasks):
        X, y = t.validation_data() if t.has_split else t.train_data()
        out.append(validation_metric(forward(model, X, i), y, t.kind))
    return out


# -- subcommands --------------------------------------------------------------

def cmd_gen(args):
    rng = np.random.default_rng(args.theta_seed)
    theta = rng.standard_normal(args.d)
    theta /= np.linalg.norm(theta)
    cov = None
    if args.kappa > 1.0:
        boosted = disjoint_boost_sets(args.d, 1, args.boost_fraction, seed=args.cov_seed)[0]
        cov = make_covariance(args.d, boosted, args.kappa, seed=args.cov_seed)
    if args.model == "linear":
        task = gen_linear_task(theta, args.m, args.sigma, cov, args.seed)
    elif args.model == "relu":
        task = gen_relu_task(theta, 1.0, args.m, args.sigma, cov, args.seed)
    else:
        task = gen_logistic_task(theta, args.m, cov, args.seed)
    if args.train:
        task = split(task, args.train, seed=args.seed)
    csv_path, sidecar = task.save(args.out)
    _emit({"csv": str(csv_path), "sidecar": str(sidecar), "m": task.m, "d": task.d})


def cmd_stl(args):
    (task,) = _load_tasks([args.data])
    theta = stl_solve(task)
    X, y = task.validation_data() if task.has_split else task.train_data()
    doc = {"theta": theta.tolist(), "metric": validation_metric(X @ theta, y, task.kind)}
    _emit(doc, args.out)


def _fit_mtl(args, tasks, weights=None):
    if args.solver == "exact":
        return fit_linear_mtl(tasks, weights, r=args.r, restarts=args.restarts, seed=args.seed), None
    cfg = _train_config(args, weights=weights)
    return train_best_of(lambda i: init_model(tasks[0].d, args.r, len(tasks), args.activation,
                                              seed=(args.seed, i)), tasks, cfg, args.restarts)


def cmd_mtl(args):
    tasks = _load_tasks(args.data)
    weights = None
    if args.weights:
        weights = json.loads(Path(args.weights).read_text(encoding="utf-8"))["weights"]
    if args.solver == "exact" and args.activation != "linear":
        raise ArgumentError("the exact solver covers the linear model only")
    model, trace = _fit_mtl(args, tasks, weights)
    if args.model_out:
        model.save(args.model_out)
    if args.trace and trace is not None:
        trace.to_csv(args.trace)
    _emit({"metrics": _metrics(model, tasks), "solver": args.solver, "r": args.r})


def cmd_align(args):
    tasks = _load_tasks(args.data)
    base, _ = _fit_mtl(args, tasks)
    cfg = _train_config(args)
    aligned, trace = train_aligned(base.with_identity_alignments(), tasks, cfg,
                                   freeze_shared=not args.train_shared)
    if args.model_out:
        aligned.save(args.model_out)
    if args.trace:
        trace.to_csv(args.trace)
    doc = {"metrics_before": _metrics(base, tasks), "metrics_after": _metrics(aligned, tasks)}
    if len(tasks) == 2:
        X1, X2 = tasks[0].train_data()[0], tasks[1].train_data()[0]
        doc["score_before"] = covariance_similarity_score(X1, X2)
        doc["score_after"] = covariance_similarity_score(X1 @ aligned.alignments[0],
                                                         X2 @ aligned.alignments[1])
    _emit(doc)


def cmd_reweight(args):
    tasks = _load_tasks(args.data)
    if args.scheme == "uniform":
        doc = {"scheme": "uniform", "weights": uniform_weights(len(tasks)).tolist()}
    elif args.scheme == "svd":
        X = tasks[0].train_data()[0]
        if any(not np.array_equal(t.train_data()[0], X) for t in tasks[1:]):
            raise ArgumentError("svd reweighting requires identical covariates across tasks")
        w, rank = svd_reweight(X, [t.train_data()[1] for t in tasks], args.rank, args.least_squares)
        doc = {"scheme": "svd", "weights": w.tolist(), "rank": rank,
               "least_squares": args.least_squares}
    else:
        cfg = _train_config(args)
        res = uncertainty_weights(tasks, init_model(tasks[0].d, args.r, len(tasks), seed=args.seed), cfg)
        doc = {"scheme": "uncertainty", "weights": res.weights.tolist(),
               "sigmas": res.sigmas.tolist(), "clamped": res.clamped}
    _emit(doc, args.out)


def cmd_score(args):
    t1, t2 = _load_tasks([args.first, args.second])
    _emit({"score": covariance_similarity_score(t1.train_data()[0], t2.train_data()[0])})


def cmd_sweep(args):
    cfg = load_config(args.config)
    if args.workers:
        cfg = replace(cfg, workers=args.workers)
    result = run(cfg)
    files = render(result, args.out)
    failed = sum(r["status"] != "ok" for r in result.records)
    _emit({"files": [str(f) for f in files], "cells": len(result.records), "failed": failed})


def cmd_render(args):
    result = ExperimentResult.load(args.result_dir)
    files = render(result, args.out or args.result_dir)
    _emit({"files": [str(f) for f in files]})


def cmd_verify(args):
    cfg = config_from_dict({"kind": "theory_verify", "seeds": list(range(args.seeds))})
    result = run(cfg)
    if args.out:
        render(result, args.out)
    ok = [r for r in result.records if r["status"] == "ok"]
    checked = [r for r in ok if r["flagged"] == 0.0]
    bound_violations = sum(r["satisfied"] != 1.0 for r in checked)
    contraction_violations = sum(r["contraction_holds"] != 1.0 for r in ok)
    doc = {
        "instances": len(result.records),
        "failed": len(result.records) - len(ok),
        "flagged": len(ok) - len(checked),
        "bound_violations": int(bound_violations),
        "contraction_violations": int(contraction_violations),
    }
    _emit(doc)
    if bound_violations or contraction_violations:
        return EXIT_VIOLATION
    if doc["failed"]:
        return EXIT_NUMERIC
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _add_training(p, solver=True):
    p.add_argument("--r", type=int, default=1, help="shared-module capacity")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=3)
    if solver:
        p.add_argument("--solver", choices=("exact", "sgd"), default="exact")
        p.add_argument("--activation", choices=("linear", "relu"), default="linear")


def build_parser():
    parser = _Parser(prog="mtlshare", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic task (CSV + JSON sidecar)")
    p.add_argument("--model", choices=("linear", "relu", "logistic"), default="linear")
    p.add_argument("--d", type=int, default=100)
    p.add_argument("--m", type=int, default=10_000)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--kappa", type=float, default=1.0, help="covariance boost (1 = isotropic)")
    p.add_argument("--boost-fraction", type=float, default=0.1)
    p.add_argument("--cov-seed", type=int, default=0)
    p.add_argument("--theta-seed", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train", type=int, default=0, help="training rows (0 = no split)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("stl", help="single-task least squares")
    p.add_argument("data")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stl)

    p = sub.add_parser("mtl", help="fit the shared-module model")
    p.add_argument("data", nargs="+")
    _add_training(p)
    p.add_argument("--weights", help="JSON file with a 'weights' list")
    p.add_argument("--model-out")
    p.add_argument("--trace", help="loss trace CSV (sgd solver)")
    p.set_defaults(func=cmd_mtl)

    p = sub.add_parser("align", help="covariance alignment on top of a fitted model")
    p.add_argument("data", nargs="+")
    _add_training(p)
    p.add_argument("--train-shared", action="store_true", help="also update the shared module")
    p.add_argument("--model-out")
    p.add_argument("--trace")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("reweight", help="compute task weights")
    p.add_argument("data", nargs="+")
    p.add_argument("--scheme", choices=("svd", "uncertainty", "uniform"), default="svd")
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--least-squares", action="store_true")
    _add_training(p, solver=False)
    p.add_argument("--out")
    p.set_defaults(func=cmd_reweight)

    p = sub.add_parser("score", help="covariance similarity of two datasets")
    p.add_argument("first")
    p.add_argument("second")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("sweep", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--out", default="results")
    p.add_argument("--workers", type=int, default=0)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="check the transfer bound and sine contraction")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("render", help="re-render a result directory")
    p.add_argument("result_dir")
    p.add_argument("--out")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        code = args.func(args)
        return EXIT_OK if code is None else code
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ArgumentError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
