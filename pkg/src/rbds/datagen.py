"""Seeded union-of-subspaces data and the two corruption protocols."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matrix_io import LabeledDataset, check_matrix, normalize_columns

CORRUPTION_KINDS = ("pixel_uniform", "block_occlusion")


@dataclass(frozen=True)
class SubspaceSpec:
    """One random ``subspace_rank``-dimensional subspace per class.

    ``coef_offset`` shifts the mean of the Gaussian coefficients. With the
    default 0 every class is symmetric about the origin (``x`` and ``-x``
    are equally likely), which no linear decision rule can use; a positive
    offset gives each class a mean direction, as natural images have.
    """

    class_count: int
    ambient_dim: int
    subspace_rank: int
    samples_per_class: int
    noise_sigma: float = 0.0
    seed: int = 0
    coef_offset: float = 0.0

    def __post_init__(self):
        if min(self.class_count, self.ambient_dim, self.subspace_rank, self.samples_per_class) < 1:
            raise ValueError("class_count, ambient_dim, subspace_rank and samples_per_class must be >= 1")
        if self.subspace_rank > self.ambient_dim:
            raise ValueError(f"subspace_rank {self.subspace_rank} exceeds ambient_dim {self.ambient_dim}")
        if not self.noise_sigma >= 0:
            raise ValueError("noise_sigma must be >= 0")


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str = "pixel_uniform"
    fraction: float = 0.0
    image_shape: tuple | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in CORRUPTION_KINDS:
            raise ValueError(f"unknown corruption kind {self.kind!r}; expected one of {CORRUPTION_KINDS}")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"fraction must lie in [0, 1], got {self.fraction}")
        if self.kind == "block_occlusion" and self.image_shape is None:
            raise ValueError("block_occlusion needs image_shape=(h, w)")


def class_bases(spec):
    """The orthonormal ``(d, r)`` basis of every class, in class order."""
    rng = np.random.default_rng(spec.seed)
    bases = []
    for _ in range(spec.class_count):
        Q, R = np.linalg.qr(rng.standard_normal((spec.ambient_dim, spec.subspace_rank)))
        bases.append(Q * np.sign(np.diag(R)))
    return bases


def gen_subspaces(spec):
    """Class-sorted unit-norm samples drawn from a union of subspaces."""
    coef_rng = np.random.default_rng([spec.seed, 1])
    r, ni = spec.subspace_rank, spec.samples_per_class
    blocks = []
    for U in class_bases(spec):
        Xc = U @ (spec.coef_offset + coef_rng.standard_normal((r, ni)))
        if spec.noise_sigma > 0:
            Xc = Xc + spec.noise_sigma * coef_rng.standard_normal(Xc.shape)
        blocks.append(Xc)
    X = normalize_columns(np.hstack(blocks))
    labels = np.repeat(np.arange(1, spec.class_count + 1), ni)
    return LabeledDataset(X, labels, spec.class_count)


def corrupt_pixels(X, spec):
    """Replace ``round(fraction * X.size)`` random entries by uniform noise.

    The noise is drawn uniformly between the smallest and largest entry of
    ``X``. Returns the corrupted copy and the sorted flat (row-major)
    indices of the replaced entries.
    """
    if spec.kind != "pixel_uniform":
        raise ValueError(f"corrupt_pixels needs kind 'pixel_uniform', got {spec.kind!r}")
    X = check_matrix(X, "X")
    rng = np.random.default_rng(spec.seed)
    k = int(round(spec.fraction * X.size))
    lo, hi = X.min(), X.max()
    idx = np.sort(rng.choice(X.size, size=k, replace=False))
    out = X.copy()
    out.flat[idx] = rng.uniform(lo, hi, size=k)
    return out, idx


def block_side(fraction, image_shape):
    h, w = image_shape
    return min(int(round(np.sqrt(fraction * h * w))), h, w)


def corrupt_block(X, spec):
    """Occlude one random square block per column.

    Each column is viewed as an ``h x w`` image (row-major). The block side
    is ``round(sqrt(fraction * h * w))`` clipped to the image, and its
    content is uniform noise on ``[min(X), max(X)]``. Returns the corrupted
    copy and one ``(top, left, side)`` tuple per column.
    """
    if spec.kind != "block_occlusion":
        raise ValueError(f"corrupt_block needs kind 'block_occlusion', got {spec.kind!r}")
    X = check_matrix(X, "X")
    h, w = spec.image_shape
    if h * w != X.shape[0]:
        raise ValueError(f"image shape {h}x{w} does not match column length {X.shape[0]}")
    rng = np.random.default_rng(spec.seed)
    s = block_side(spec.fraction, (h, w))
    lo, hi = X.min(), X.max()
    out = X.copy()
    rects = []
    for j in range(X.shape[1]):
        top = int(rng.integers(0, h - s + 1))
        left = int(rng.integers(0, w - s + 1))
        if s:
            img = out[:, j].reshape(h, w)
            img[top:top + s, left:left + s] = rng.uniform(lo, hi, size=(s, s))
            out[:, j] = img.ravel()
        rects.append((top, left, s))
    return out, rects


def corrupt(X, spec):
    """Dispatch on ``spec.kind``; returns only the corrupted matrix."""
    if spec.kind == "pixel_uniform":
        return corrupt_pixels(X, spec)[0]
    return corrupt_block(X, spec)[0]
