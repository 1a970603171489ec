import numpy as np
import pytest

from rbds.coder import code, coding_objective
from rbds.solver import Dictionary, SolverConfig


@pytest.fixture
def orthonormal_dict(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((8, 6)))
    return Dictionary(Q, np.array([1, 1, 2, 2, 3, 3]))


def test_single_atom_is_feasible(orthonormal_dict):
    D = orthonormal_dict.atoms
    cfg = SolverConfig()
    res = code(D[:, [2]], orthonormal_dict, cfg)
    assert res.converged
    assert np.max(np.abs(D[:, [2]] - D @ res.Z_hat - res.E_hat)) < cfg.eps_tol


def test_zero_test_matrix(orthonormal_dict):
    res = code(np.zeros((8, 4)), orthonormal_dict, SolverConfig())
    assert coding_objective(res.Z_hat, res.E_hat, 0.1, 0.1) <= 1e-8


def test_shapes_and_dimension_check(orthonormal_dict, rng):
    res = code(rng.standard_normal((8, 5)), orthonormal_dict, SolverConfig())
    assert res.Z_hat.shape == (6, 5) and res.E_hat.shape == (8, 5)
    assert np.all(np.isfinite(res.Z_hat))
    with pytest.raises(ValueError, match="dimension"):
        code(rng.standard_normal((7, 5)), orthonormal_dict, SolverConfig())


def test_dictionary_not_modified(orthonormal_dict, rng):
    before = orthonormal_dict.atoms.copy()
    code(rng.standard_normal((8, 5)), orthonormal_dict, SolverConfig(alpha=5.0))
    np.testing.assert_array_equal(orthonormal_dict.atoms, before)


def test_batch_not_worse_than_per_sample(orthonormal_dict, rng):
    X = rng.standard_normal((8, 6))
    cfg = SolverConfig()
    batch = code(X, orthonormal_dict, cfg)
    single = code(X, orthonormal_dict, cfg, per_sample=True)
    assert batch.converged and single.converged
    per_col = sum(coding_objective(single.Z_hat[:, [j]], single.E_hat[:, [j]], cfg.lam, cfg.beta)
                  for j in range(X.shape[1]))
    assert coding_objective(batch.Z_hat, batch.E_hat, cfg.lam, cfg.beta) <= per_col + 1e-6


def test_converged_runs_feasible(orthonormal_dict, rng):
    X = rng.standard_normal((8, 6))
    cfg = SolverConfig(normalize=False)
    res = code(X, orthonormal_dict, cfg)
    assert res.converged
    assert np.max(np.abs(X - orthonormal_dict.atoms @ res.Z_hat - res.E_hat)) < cfg.eps_tol
