"""Low-rank + sparse coding of new samples against a fixed dictionary."""

from dataclasses import dataclass, replace

import numpy as np

from .matrix_io import check_matrix, normalize_columns
from .prox import nuclear_norm
from .solver import run_alm


@dataclass
class CodingResult:
    Z_hat: np.ndarray
    E_hat: np.ndarray
    converged: bool
    iterations_used: int
    residual_history: list = None


def coding_objective(Z, E, lam, beta):
    """``||Z||_* + lam ||E||_1 + beta ||Z||_1``."""
    return nuclear_norm(Z) + lam * float(np.abs(E).sum()) + beta * float(np.abs(Z).sum())


def code(test, dictionary, cfg, per_sample=False):
    """Represent the columns of ``test`` over ``dictionary``.

    Solves ``min ||Z||_* + lam ||E||_1 + beta ||Z||_1  s.t.  X = D Z + E``
    with the training solver (no off-block term, dictionary frozen).
    ``lam`` and ``beta`` are taken from ``cfg``. When ``cfg.normalize`` is
    set the test columns are scaled to unit length first, matching how the
    training data was treated.

    With ``per_sample`` every column is coded on its own and the results
    are stacked; ``converged`` is then true only if all columns converged
    and ``iterations_used`` is the maximum over columns.
    """
    X = check_matrix(test, "test")
    D = dictionary.atoms
    if X.shape[0] != D.shape[0]:
        raise ValueError(f"test samples have dimension {X.shape[0]}, dictionary atoms {D.shape[0]}")
    if cfg.normalize:
        X = normalize_columns(X)
    cfg = replace(cfg, alpha=0.0, dict_update_enabled=False)
    if not per_sample:
        state, ok = run_alm(X, D, cfg, mask=None, learn_dict=False)
        return CodingResult(state.Z, state.E, ok, state.iter, state.residual_history)
    Zs, Es, oks, its = [], [], [], []
    for j in range(X.shape[1]):
        state, ok = run_alm(X[:, j:j + 1], D, cfg, mask=None, learn_dict=False)
        Zs.append(state.Z)
        Es.append(state.E)
        oks.append(ok)
        its.append(state.iter)
    return CodingResult(np.hstack(Zs), np.hstack(Es), all(oks), max(its))
