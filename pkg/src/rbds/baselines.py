"""Reference methods sharing the ALM machinery: RPCA, LRRS and LRRS_BD."""

from dataclasses import dataclass, field, replace

import numpy as np

from .matrix_io import LabeledDataset, check_matrix, normalize_columns
from .prox import soft_threshold, svt
from .solver import Dictionary, DivergenceError, SolverConfig, fit_rbds


@dataclass
class RpcaResult:
    A_lowrank: np.ndarray
    E_sparse: np.ndarray
    converged: bool
    iterations_used: int
    residual_history: list = field(default_factory=list)
    objective_history: list = field(default_factory=list)


def default_rpca_lambda(shape):
    return 1.0 / np.sqrt(max(shape))


def rpca(X, lam=None, cfg=None):
    """Split ``X`` into low-rank plus sparse parts.

    Solves ``min ||A||_* + lam ||E||_1  s.t.  X = A + E`` by inexact ALM
    with the same penalty schedule and stopping rule as the RBDS solver
    (``mu0``, ``rho``, ``mu_max``, ``eps_tol`` and ``max_iters`` from
    ``cfg``). ``lam`` defaults to ``1 / sqrt(max(d, n))``.
    """
    X = check_matrix(X, "X")
    cfg = cfg or SolverConfig()
    lam = default_rpca_lambda(X.shape) if lam is None else float(lam)
    if not lam > 0:
        raise ValueError(f"lam must be > 0, got {lam}")
    A = np.zeros_like(X)
    E = np.zeros_like(X)
    Y = np.zeros_like(X)
    mu = cfg.mu0
    result = RpcaResult(A, E, False, 0)
    for k in range(1, int(cfg.max_iters) + 1):
        A, sv = svt(X - E + Y / mu, 1.0 / mu, return_singular_values=True)
        E = soft_threshold(X - A + Y / mu, lam / mu)
        R = X - A - E
        res = float(np.max(np.abs(R)))
        if not (np.isfinite(res) and np.all(np.isfinite(A)) and np.all(np.isfinite(E))):
            raise DivergenceError(k, (res,), result)
        result.residual_history.append((k, res))
        result.objective_history.append(float(sv.sum() + lam * np.abs(E).sum()))
        Y = Y + mu * R
        mu = min(cfg.mu_max, cfg.rho * mu)
        result.A_lowrank, result.E_sparse, result.iterations_used = A, E, k
        if res < cfg.eps_tol:
            result.converged = True
            break
    return result


def _training_dictionary(train, cfg):
    atoms = normalize_columns(train.data) if cfg.normalize else np.array(train.data)
    return Dictionary(atoms, np.array(train.labels))


def fit_lrrs(train, cfg=None, trace=False):
    """Low-rank + sparse representation over the fixed training dictionary."""
    cfg = replace(cfg or SolverConfig(), alpha=0.0, dict_update_enabled=False)
    return fit_rbds(train, cfg, dictionary=_training_dictionary(train, cfg), trace=trace)


def fit_lrrs_bd(train, cfg=None, trace=False):
    """As :func:`fit_lrrs` but keeping the off-block penalty ``cfg.alpha``."""
    cfg = replace(cfg or SolverConfig(), dict_update_enabled=False)
    return fit_rbds(train, cfg, dictionary=_training_dictionary(train, cfg), trace=trace)


def fit_rpca_lrrs(train, cfg=None, rpca_lam=None, trace=False):
    """RPCA-clean the training matrix, then fit LRRS on the low-rank part.

    Returns ``(model, rpca_result)``.
    """
    cfg = cfg or SolverConfig()
    X = normalize_columns(train.data) if cfg.normalize else np.array(train.data)
    pre = rpca(X, rpca_lam, cfg)
    cleaned = LabeledDataset(pre.A_lowrank, train.labels, train.class_count)
    return fit_lrrs(cleaned, cfg, trace=trace), pre
