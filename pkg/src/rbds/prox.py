"""Proximal operators of the l1 norm and the nuclear norm."""

import numpy as np

# singular values this close to the threshold are zeroed (ties go to lower rank)
SV_TIE_TOL = 1e-12


def _check_threshold(eps):
    eps = float(eps)
    if not np.isfinite(eps) or eps < 0:
        raise ValueError(f"threshold must be finite and >= 0, got {eps}")
    return eps


def soft_threshold(x, eps):
    """Elementwise shrinkage ``sign(x) * max(|x| - eps, 0)``.

    This is the minimizer of ``eps * |v| + 0.5 * (v - x)**2`` for every
    entry. Scalars come back as floats, arrays keep their shape.
    """
    eps = _check_threshold(eps)
    x = np.asarray(x, dtype=np.float64)
    out = np.sign(x) * np.maximum(np.abs(x) - eps, 0.0)
    return float(out) if out.ndim == 0 else out


def svt(y, tau, return_singular_values=False):
    """Singular value thresholding ``U diag(max(s - tau, 0)) V^T``.

    Exact minimizer of ``tau * ||J||_* + 0.5 * ||J - y||_F^2``. With
    ``return_singular_values`` the shrunk singular values are returned as
    well (their sum is the nuclear norm of the result).
    """
    tau = _check_threshold(tau)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2:
        raise ValueError(f"svt expects a matrix, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise FloatingPointError("svt input contains non-finite values")
    U, s, Vt = np.linalg.svd(y, full_matrices=False)
    keep = s > tau + SV_TIE_TOL
    r = int(keep.sum())
    shrunk = s[:r] - tau
    out = (U[:, :r] * shrunk) @ Vt[:r] if r else np.zeros_like(y)
    if return_singular_values:
        return out, shrunk
    return out


def nuclear_norm(a):
    return float(np.linalg.svd(a, compute_uv=False).sum())
