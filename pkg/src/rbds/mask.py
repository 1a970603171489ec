"""Class-incoherence mask penalizing entries outside the same-class blocks."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MaskA:
    """Binary ``(m, n)`` mask: 0 where atom i and sample j share a class, else 1."""

    matrix: np.ndarray
    atom_labels: np.ndarray
    sample_labels: np.ndarray

    @property
    def shape(self):
        return self.matrix.shape


def build_mask(atom_labels, sample_labels):
    atom_labels = np.asarray(atom_labels, dtype=np.int64).ravel()
    sample_labels = np.asarray(sample_labels, dtype=np.int64).ravel()
    if atom_labels.size == 0 or sample_labels.size == 0:
        raise ValueError("mask needs non-empty atom and sample label lists")
    if atom_labels.min() < 1 or sample_labels.min() < 1:
        raise ValueError("class ids start at 1")
    A = (atom_labels[:, None] != sample_labels[None, :]).astype(np.float64)
    A.setflags(write=False)
    return MaskA(A, atom_labels, sample_labels)


def complement(a):
    """Same-class indicator ``M = 1 1^T - A``."""
    return 1.0 - a.matrix


def offblock_energy(z, a):
    """Squared Frobenius norm of the masked entries, ``||A * Z||_F^2``."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != a.shape:
        raise ValueError(f"representation shape {z.shape} does not match mask shape {a.shape}")
    return float(np.sum(a.matrix * z * z))


def offblock_ratio(z, a):
    """Off-block energy normalized by ``||Z||_F^2`` (0 for an all-zero Z)."""
    total = float(np.sum(np.asarray(z) ** 2))
    return offblock_energy(z, a) / total if total > 0 else 0.0
