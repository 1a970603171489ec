"""Closed-form ridge classifier on representation vectors."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .matrix_io import check_matrix, load_matrix, save_matrix


@dataclass(frozen=True)
class ClassifierModel:
    W: np.ndarray
    eta: float

    @property
    def n_classes(self):
        return self.W.shape[0]


def train_classifier(Z, H, eta=1.0):
    """Minimize ``||H - W Z||_F^2 + eta ||W||_F^2``.

    The solution is ``W = H Z^T (Z Z^T + eta I)^{-1}``; it is computed from
    the symmetric system ``(Z Z^T + eta I) W^T = Z H^T``.
    """
    eta = float(eta)
    if not (np.isfinite(eta) and eta > 0):
        raise ValueError(f"eta must be > 0, got {eta}")
    Z = check_matrix(Z, "Z")
    H = check_matrix(H, "H")
    if H.shape[1] != Z.shape[1]:
        raise ValueError(f"H has {H.shape[1]} columns, Z has {Z.shape[1]}")
    G = Z @ Z.T + eta * np.eye(Z.shape[0])
    W = np.linalg.solve(G, Z @ H.T).T
    return ClassifierModel(W, eta)


def scores(model, z_hat):
    z = np.asarray(z_hat, dtype=np.float64)
    if z.ndim == 1:
        z = z[:, None]
    if z.shape[0] != model.W.shape[1]:
        raise ValueError(f"representation has {z.shape[0]} rows, classifier expects {model.W.shape[1]}")
    return model.W @ z


def predict(model, z_hat):
    """Class id (1-based) of the largest output; ties go to the smaller id.

    A single vector gives an ``int``, a matrix gives one id per column.
    """
    ids = np.argmax(scores(model, z_hat), axis=0) + 1
    return int(ids[0]) if np.ndim(z_hat) == 1 else ids


def evaluate(model, coding, true_labels):
    """Fraction of test columns classified correctly."""
    Z_hat = getattr(coding, "Z_hat", coding)
    true_labels = np.asarray(true_labels).ravel()
    if Z_hat.shape[1] == 0 or true_labels.size == 0:
        raise ValueError("cannot evaluate on an empty test set")
    if true_labels.size != Z_hat.shape[1]:
        raise ValueError(f"{true_labels.size} labels for {Z_hat.shape[1]} coded samples")
    return float(np.mean(predict(model, Z_hat) == true_labels))


def save_classifier(model, directory, format="csv"):
    directory = Path(directory)
    save_matrix(model.W, directory / ("W.csv" if format == "csv" else "W.bin"), format)
    (directory / "classifier.txt").write_text(f"eta={model.eta!r}\nformat={format}\n")


def load_classifier(directory):
    directory = Path(directory)
    meta = dict(line.split("=", 1) for line in (directory / "classifier.txt").read_text().split())
    fmt = meta.get("format", "csv")
    W = load_matrix(directory / ("W.csv" if fmt == "csv" else "W.bin"), fmt)
    return ClassifierModel(W, float(meta["eta"]))
