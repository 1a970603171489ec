"""Inexact ALM solver for block-diagonal low-rank + sparse representations.

The solver minimizes

    ||Z||_* + lam ||E||_1 + alpha/2 ||A * Z||_F^2 + beta ||Z||_1 + gamma/2 ||D||_F^2
    s.t.  X = D Z + E

over the representation ``Z``, the sparse error ``E`` and (optionally) the
dictionary ``D``. Two auxiliary copies ``J`` (nuclear norm) and ``L``
(l1 norm) of ``Z`` split the problem so that every block update is either
a proximal step or a linear solve. One iteration updates, in order,
``J, Z, L, E, D`` and then the multipliers ``Y1, Y2, Y3`` and the penalty
``mu``.

Disabling the dictionary update and fixing ``D`` to the training data
gives the fixed-dictionary variants used as baselines and for test-time
coding; all of them share :func:`run_alm`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .mask import build_mask, complement
from .matrix_io import LabeledDataset, check_matrix, normalize_columns
from .prox import nuclear_norm, soft_threshold, svt


class ConfigError(ValueError):
    """Invalid solver or experiment configuration."""


class DivergenceError(FloatingPointError):
    """A non-finite value appeared during the iterations."""

    def __init__(self, iteration, residuals, state=None):
        self.iteration = iteration
        self.residuals = residuals
        self.state = state
        super().__init__(
            f"solver diverged at iteration {iteration}; last residuals "
            f"(data, J, L) = {tuple(float(r) for r in residuals)}"
        )


@dataclass(frozen=True)
class SolverConfig:
    """Weights and ALM schedule.

    ``lam`` weights ``||E||_1``, ``alpha`` the off-block penalty, ``beta``
    ``||Z||_1`` and ``gamma`` ``||D||_F^2``. ``mu0``, ``mu_max``, ``rho``
    and ``eps_tol`` drive the penalty schedule and the stopping test.
    """

    lam: float = 0.1
    alpha: float = 1.0
    beta: float = 0.1
    gamma: float = 1.0
    mu0: float = 1e-5
    mu_max: float = 1e8
    rho: float = 1.1
    eps_tol: float = 1e-6
    max_iters: int = 500
    atoms_per_class: int = 5
    dict_update_enabled: bool = True
    normalize: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigError(f"lam must be > 0, got {self.lam}")
        for name in ("alpha", "beta", "gamma"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0 < self.mu0 < self.mu_max:
            raise ConfigError(f"need 0 < mu0 < mu_max, got mu0={self.mu0}, mu_max={self.mu_max}")
        if not self.rho > 1:
            raise ConfigError(f"rho must be > 1, got {self.rho}")
        if not self.eps_tol > 0:
            raise ConfigError(f"eps_tol must be > 0, got {self.eps_tol}")
        if int(self.max_iters) < 1 or int(self.atoms_per_class) < 1:
            raise ConfigError("max_iters and atoms_per_class must be positive")

    def with_updates(self, **kw):
        return replace(self, **kw)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class Dictionary:
    atoms: np.ndarray
    atom_labels: np.ndarray

    def __post_init__(self):
        atoms = check_matrix(self.atoms, "dictionary")
        labels = np.asarray(self.atom_labels, dtype=np.int64).ravel()
        if labels.shape[0] != atoms.shape[1]:
            raise ValueError(f"{labels.shape[0]} atom labels for {atoms.shape[1]} atoms")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "atom_labels", labels)

    @property
    def n_atoms(self):
        return self.atoms.shape[1]


@dataclass
class SolverState:
    X: np.ndarray
    D: np.ndarray
    Z: np.ndarray
    J: np.ndarray
    L: np.ndarray
    E: np.ndarray
    Y1: np.ndarray
    Y2: np.ndarray
    Y3: np.ndarray
    mu: float
    iter: int = 0
    residual_history: list = field(default_factory=list)
    mu_history: list = field(default_factory=list)
    objective_history: list = field(default_factory=list)

    @classmethod
    def initial(cls, X, D, mu0):
        d, n = X.shape
        m = D.shape[1]
        zeros = lambda *s: np.zeros(s)  # noqa: E731
        return cls(X=X, D=D, Z=zeros(m, n), J=zeros(m, n), L=zeros(m, n), E=zeros(d, n),
                   Y1=zeros(d, n), Y2=zeros(m, n), Y3=zeros(m, n), mu=float(mu0))

    def is_finite(self):
        return all(np.all(np.isfinite(getattr(self, k))) for k in ("D", "Z", "J", "L", "E", "Y1", "Y2", "Y3"))


@dataclass
class RbdsModel:
    dictionary: Dictionary
    Z_train: np.ndarray
    E_train: np.ndarray
    config: SolverConfig
    converged: bool
    iterations_used: int
    sample_labels: np.ndarray
    residual_history: list
    mu_history: list
    objective_history: list = field(default_factory=list)

    @property
    def mask(self):
        return build_mask(self.dictionary.atom_labels, self.sample_labels)


def init_dictionary(train, atoms_per_class, seed):
    """Seeded per-class sample of unit-norm training columns, class-sorted."""
    rng = np.random.default_rng(seed)
    cols, labels = [], []
    for c in range(1, train.class_count + 1):
        idx = np.flatnonzero(train.labels == c)
        if idx.size < atoms_per_class:
            raise ConfigError(
                f"class {c} has {idx.size} training samples but atoms_per_class={atoms_per_class}"
            )
        pick = rng.choice(idx, size=atoms_per_class, replace=False)
        cols.append(train.data[:, pick])
        labels += [c] * atoms_per_class
    atoms = normalize_columns(np.hstack(cols))
    return Dictionary(atoms, np.array(labels))


# ---------------------------------------------------------------------------
# block updates; each returns the new value and leaves ``state`` untouched


def update_J(state, cfg):
    return svt(state.Z + state.Y2 / state.mu, 1.0 / state.mu)


def update_Z(state, mask, cfg):
    """Closed-form minimizer of the Z subproblem.

    The off-block penalty is replaced by ``alpha/2 ||Z - R||_F^2`` with
    ``R = M * Z_prev`` built from the incoming ``state.Z``; ``state.J`` must
    already hold the new ``J`` and ``state.L`` the previous ``L``.
    """
    mu, D = state.mu, state.D
    m = D.shape[1]
    rhs = D.T @ (state.X - state.E) + state.J + state.L
    extra = D.T @ state.Y1 - state.Y2 - state.Y3
    if cfg.alpha:
        if mask is None:
            raise ConfigError("alpha > 0 requires a mask")
        extra = cfg.alpha * (complement(mask) * state.Z) + extra
    rhs = rhs + extra / mu
    lhs = D.T @ D + (cfg.alpha / mu + 2.0) * np.eye(m)
    return np.linalg.solve(lhs, rhs)


def update_L(state, cfg):
    return soft_threshold(state.Z + state.Y3 / state.mu, cfg.beta / state.mu)


def update_E(state, cfg):
    return soft_threshold(state.X - state.D @ state.Z + state.Y1 / state.mu, cfg.lam / state.mu)


def update_D(state, cfg):
    mu, Z = state.mu, state.Z
    B = state.Y1 @ Z.T / mu - (state.E - state.X) @ Z.T
    G = (cfg.gamma / mu) * np.eye(Z.shape[0]) + Z @ Z.T
    # G is symmetric, so D G = B  <=>  G D^T = B^T
    return np.linalg.solve(G, B.T).T


def residuals(state):
    """Infinity norms of ``X - DZ - E``, ``Z - J`` and ``Z - L``."""
    return (
        float(np.max(np.abs(state.X - state.D @ state.Z - state.E))),
        float(np.max(np.abs(state.Z - state.J))),
        float(np.max(np.abs(state.Z - state.L))),
    )


def update_multipliers(state, cfg):
    mu = state.mu
    Y1 = state.Y1 + mu * (state.X - state.D @ state.Z - state.E)
    Y2 = state.Y2 + mu * (state.Z - state.J)
    Y3 = state.Y3 + mu * (state.Z - state.L)
    return Y1, Y2, Y3, min(cfg.mu_max, cfg.rho * mu)


def check_convergence(state, cfg):
    return all(r < cfg.eps_tol for r in residuals(state))


def objective(X, D, Z, E, cfg, mask=None):
    """Value of the full training objective (constraint not included)."""
    val = nuclear_norm(Z) + cfg.lam * np.abs(E).sum() + cfg.beta * np.abs(Z).sum()
    val += 0.5 * cfg.gamma * np.sum(D * D)
    if cfg.alpha and mask is not None:
        val += 0.5 * cfg.alpha * np.sum((mask.matrix * Z) ** 2)
    return float(val)


def run_alm(X, D0, cfg, mask=None, learn_dict=None, trace=False):
    """Iterate the ALM updates from the all-zero start.

    Returns ``(state, converged)``. Reaching ``cfg.max_iters`` is not an
    error; a non-finite iterate raises :class:`DivergenceError`.
    """
    if learn_dict is None:
        learn_dict = cfg.dict_update_enabled
    X = check_matrix(X, "X")
    D0 = check_matrix(D0, "dictionary")
    if D0.shape[0] != X.shape[0]:
        raise ValueError(f"dictionary has {D0.shape[0]} rows, data has {X.shape[0]}")
    if mask is not None and mask.shape != (D0.shape[1], X.shape[1]):
        raise ValueError(f"mask shape {mask.shape} != {(D0.shape[1], X.shape[1])}")
    state = SolverState.initial(X, D0.copy(), cfg.mu0)
    converged = False
    res = (np.inf, np.inf, np.inf)
    for k in range(1, int(cfg.max_iters) + 1):
        state.iter = k
        try:
            state.J = update_J(state, cfg)
            state.Z = update_Z(state, mask, cfg)
            state.L = update_L(state, cfg)
            state.E = update_E(state, cfg)
            if learn_dict:
                state.D = update_D(state, cfg)
        except (np.linalg.LinAlgError, FloatingPointError) as exc:
            raise DivergenceError(k, res, state) from exc
        res = residuals(state)
        state.residual_history.append((k, *res))
        state.mu_history.append(state.mu)
        if trace:
            state.objective_history.append(objective(X, state.D, state.Z, state.E, cfg, mask))
        state.Y1, state.Y2, state.Y3, state.mu = update_multipliers(state, cfg)
        if not (state.is_finite() and np.all(np.isfinite(res))):
            raise DivergenceError(k, res, state)
        if all(r < cfg.eps_tol for r in res):
            converged = True
            break
    return state, converged


def fit_rbds(train, cfg=None, dictionary=None, trace=False):
    """Learn a dictionary and a block-diagonal representation of ``train``.

    Parameters
    ----------
    train : LabeledDataset
    cfg : SolverConfig, optional
    dictionary : Dictionary, optional
        Starting dictionary. When omitted it is drawn with
        :func:`init_dictionary` using ``cfg.seed``.
    trace : bool
        Record the objective value at every iteration.
    """
    cfg = cfg or SolverConfig()
    if not isinstance(train, LabeledDataset):
        raise TypeError("train must be a LabeledDataset")
    X = normalize_columns(train.data) if cfg.normalize else np.array(train.data)
    if dictionary is None:
        dictionary = init_dictionary(train, cfg.atoms_per_class, cfg.seed)
    mask = build_mask(dictionary.atom_labels, train.labels)
    state, converged = run_alm(X, dictionary.atoms, cfg, mask=mask, trace=trace)
    return RbdsModel(
        dictionary=Dictionary(state.D, dictionary.atom_labels),
        Z_train=state.Z,
        E_train=state.E,
        config=cfg,
        converged=converged,
        iterations_used=state.iter,
        sample_labels=np.array(train.labels),
        residual_history=state.residual_history,
        mu_history=state.mu_history,
        objective_history=state.objective_history,
    )


def write_trace(path, residual_history, mu_history, objective_history=()):
    """Per-iteration CSV: iter, the three residuals, mu and the objective."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "res_data", "res_J", "res_L", "mu", "objective"])
        for i, (row, mu) in enumerate(zip(residual_history, mu_history)):
            obj = objective_history[i] if i < len(objective_history) else ""
            w.writerow([row[0], *(f"{v:.17g}" for v in row[1:]), f"{mu:.17g}",
                        f"{obj:.17g}" if obj != "" else ""])
