"""Command line entry point: ``rbds {gen,train,code,eval,sweep,report}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import baselines, bench
from .classifier import evaluate, train_classifier
from .coder import code
from .datagen import corrupt, gen_subspaces
from .matrix_io import (LabeledDataset, guess_format, load_dataset, load_labels, load_matrix,
                        one_hot, save_dataset, save_matrix)
from .persist import load_model_parts, save_model
from .solver import ConfigError, DivergenceError, fit_rbds

log = logging.getLogger("rbds")


def _common(p):
    p.add_argument("--config", type=Path, help="key = value experiment config")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--method", action="append", choices=bench.METHODS,
                   help="method to run; repeat for several (overrides config)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key; repeatable")
    p.add_argument("--quiet", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="rbds", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic dataset")
    _common(p)
    p.add_argument("--format", choices=("csv", "rawbin"), default="csv")
    p.add_argument("--corrupt", action="store_true", help="apply the train.* corruption")

    p = sub.add_parser("train", help="fit one method and save the model")
    _common(p)
    p.add_argument("--format", choices=("csv", "rawbin"), default="rawbin")

    p = sub.add_parser("code", help="code test samples with a saved model")
    _common(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--labels", type=Path, help="true labels; prints accuracy")
    p.add_argument("--per-sample", action="store_true")

    p = sub.add_parser("eval", help="full pipeline over repetitions; writes report.csv")
    _common(p)
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("sweep", help="repeat eval over values of one numeric key")
    _common(p)
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True, help="comma separated")
    p.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("report", help="re-render tables and figures of an eval directory")
    _common(p)
    return parser


def load_config(args):
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.method:
        overrides["methods"] = ",".join(args.method)
    if args.config:
        return bench.ExperimentConfig.from_file(args.config, overrides)
    return bench.ExperimentConfig.from_mapping(overrides)


def _need_out(args):
    if args.out is None:
        raise ConfigError(f"{args.command} needs --out DIR")
    return args.out


def _dataset(cfg):
    if cfg.data is not None:
        return gen_subspaces(replace(cfg.data, seed=cfg.seed))
    return load_dataset(cfg.data_path, cfg.labels_path, cfg.data_format or None)


def cmd_gen(args, cfg):
    out = _need_out(args)
    if cfg.data is None:
        raise ConfigError("gen needs data.source = synthetic")
    ds = _dataset(cfg)
    if args.corrupt:
        ds = LabeledDataset(corrupt(ds.data, bench.reseed_corruption(cfg.train_corruption, cfg.seed)),
                            ds.labels, ds.class_count)
    ext = ".csv" if args.format == "csv" else ".bin"
    save_dataset(ds, out / f"data{ext}", out / "labels.csv", args.format)
    log.info("wrote %dx%d data and %d labels to %s", *ds.data.shape, ds.n_samples, out)


def cmd_train(args, cfg):
    out = _need_out(args)
    if len(cfg.methods) != 1:
        raise ConfigError("train fits exactly one method; pass --method")
    method = cfg.methods[0]
    ds = _dataset(cfg)
    spec = bench.reseed_corruption(cfg.train_corruption, bench.derive_seed(cfg.seed, 0, 2))
    ds = LabeledDataset(corrupt(ds.data, spec), ds.labels, ds.class_count)
    scfg = cfg.solvers[method].with_updates(seed=bench.derive_seed(cfg.seed, 0, 4))
    with bench.kernel_threads():
        if method == "rbds":
            model = fit_rbds(ds, scfg, trace=True)
        elif method == "lrrs":
            model = baselines.fit_lrrs(ds, scfg, trace=True)
        elif method == "lrrs_bd":
            model = baselines.fit_lrrs_bd(ds, scfg, trace=True)
        else:
            model = baselines.fit_rpca_lrrs(ds, scfg, cfg.rpca_lambda, trace=True)[0]
    clf = train_classifier(model.Z_train, one_hot(ds), cfg.eta)
    save_model(out, model, clf, args.format)
    log.info("%s: converged=%s after %d iterations; model in %s",
             method, model.converged, model.iterations_used, out)


def cmd_code(args, cfg):
    out = _need_out(args)
    dictionary, scfg, clf = load_model_parts(args.model)
    X = load_matrix(args.data, guess_format(args.data))
    with bench.kernel_threads():
        res = code(X, dictionary, scfg, per_sample=args.per_sample)
    save_matrix(res.Z_hat, out / "Zhat.bin", "rawbin")
    save_matrix(res.E_hat, out / "Ehat.bin", "rawbin")
    log.info("coded %d samples: converged=%s iterations=%d", X.shape[1], res.converged, res.iterations_used)
    if args.labels is not None:
        if clf is None:
            raise ConfigError(f"{args.model} has no classifier")
        acc = evaluate(clf, res, load_labels(args.labels))
        print(f"accuracy {acc:.6f}")


def cmd_eval(args, cfg):
    out = _need_out(args)
    progress = None if args.quiet else (
        lambda r: log.info("rep %d %-20s acc=%.4f iters=%d conv=%s", r.repetition, r.method,
                           r.accuracy, r.iterations, r.converged))
    report = bench.run_experiment(cfg, out, figures=not args.no_figures, progress=progress)
    if not args.quiet:
        sys.stdout.write(bench.render_table(report))


def cmd_sweep(args, cfg):
    out = _need_out(args)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    reports = bench.sweep(cfg, args.param, values, out, figures=not args.no_figures)
    if not args.quiet:
        for v, rep in zip(values, reports):
            sys.stdout.write(f"\n{args.param} = {v}\n" + bench.render_table(rep))


def cmd_report(args, cfg):
    from .plotting import render_report_figures
    out = _need_out(args)
    report = bench.load_report_dir(out)
    models = {}
    for method in report.methods:
        slug = method.replace("+", "_")
        base = out / "models" / f"rep00_{slug}"
        z_path = base.with_name(base.name + "_Z.bin")
        if not z_path.exists():
            continue
        Z = load_matrix(z_path, "rawbin")
        al = load_labels(base.with_name(base.name + "_atom_labels.csv"))
        sl = load_labels(base.with_name(base.name + "_sample_labels.csv"))
        trace = out / "traces" / f"rep00_{slug}.csv"
        hist = []
        if trace.exists():
            t = np.genfromtxt(trace, delimiter=",", names=True)
            hist = [tuple(r) for r in np.column_stack([t["iter"], t["res_data"], t["res_J"], t["res_L"]])]
        models[method] = (Z, al, sl, hist)
    bench.write_text_atomic(out / "report.txt", bench.render_table(report))
    render_report_figures(report, out, models)
    if not args.quiet:
        sys.stdout.write(bench.render_table(report))


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "code": cmd_code, "eval": cmd_eval,
            "sweep": cmd_sweep, "report": cmd_report}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args)
        COMMANDS[args.command](args, cfg)
    except (ConfigError, DivergenceError, ValueError, OSError) as exc:
        print(f"rbds {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
