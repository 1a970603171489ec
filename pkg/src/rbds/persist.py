"""Saving and loading trained models as a directory of matrix files."""

from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .classifier import load_classifier, save_classifier
from .matrix_io import load_labels, load_matrix, save_labels, save_matrix
from .solver import Dictionary, SolverConfig, write_trace

_EXT = {"csv": ".csv", "rawbin": ".bin"}


def solver_config_text(cfg):
    return "".join(f"{k} = {v!r}\n" for k, v in asdict(cfg).items())


def parse_solver_config(text):
    types = {f.name: f.type for f in fields(SolverConfig)}
    kw = {}
    for line in text.splitlines():
        if "=" not in line:
            continue
        k, v = (t.strip() for t in line.split("=", 1))
        t = types.get(k)
        if t in ("bool", bool):
            kw[k] = v == "True"
        elif t in ("int", int):
            kw[k] = int(v)
        elif t is not None:
            kw[k] = float(v)
    return SolverConfig(**kw)


def save_model(directory, model, classifier=None, format="rawbin"):
    """Write dictionary, representation, error, classifier and trace."""
    d = Path(directory)
    ext = _EXT[format]
    save_matrix(model.dictionary.atoms, d / f"D{ext}", format)
    save_labels(model.dictionary.atom_labels, d / "atom_labels.csv")
    save_matrix(model.Z_train, d / f"Z{ext}", format)
    save_matrix(model.E_train, d / f"E{ext}", format)
    save_labels(model.sample_labels, d / "sample_labels.csv")
    (d / "solver.txt").write_text(solver_config_text(model.config))
    (d / "status.txt").write_text(f"converged={model.converged}\niterations_used={model.iterations_used}\n")
    write_trace(d / "trace.csv", model.residual_history, model.mu_history, model.objective_history)
    if classifier is not None:
        save_classifier(classifier, d, "csv")


def load_model_parts(directory):
    """Return ``(dictionary, solver_config, classifier_or_None)``."""
    d = Path(directory)
    fmt = "rawbin" if (d / "D.bin").exists() else "csv"
    D = load_matrix(d / f"D{_EXT[fmt]}", fmt)
    dictionary = Dictionary(D, load_labels(d / "atom_labels.csv"))
    cfg = parse_solver_config((d / "solver.txt").read_text())
    clf = load_classifier(d) if (d / "classifier.txt").exists() else None
    return dictionary, cfg, clf


def load_representation(directory):
    d = Path(directory)
    fmt = "rawbin" if (d / "Z.bin").exists() else "csv"
    return load_matrix(d / f"Z{_EXT[fmt]}", fmt), np.asarray(load_labels(d / "sample_labels.csv"))

