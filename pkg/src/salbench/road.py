"""Noisy-linear-interpolation imputation and the deletion-style metric built on it.

Masked pixels are reconstructed by solving a sparse weighted-Laplacian system:
each masked pixel equals the weighted mean of its 8-neighborhood (direct
neighbors weighted more than diagonal ones) plus optional Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import ColorSpace, ImageTensor, NormalizationSpec, SaliencyMap
from .errors import (
    InvalidArgumentError,
    InvalidStateError,
    SingularSystemError,
    SolverFailureError,
)
from .models import DEFAULT_BATCH_SIZE, ModelAdapter, score_raw
from .rng import philox

_DIRECT = ((-1, 0), (1, 0), (0, -1), (0, 1))
_DIAGONAL = ((-1, -1), (-1, 1), (1, -1), (1, 1))


@dataclass(frozen=True)
class PixelMask:
    """Boolean grid of pixels to remove and impute."""

    masked: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.masked, dtype=bool)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidArgumentError(f"mask must be a 2-D grid, got shape {arr.shape}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "masked", arr)

    @property
    def height(self) -> int:
        return self.masked.shape[0]

    @property
    def width(self) -> int:
        return self.masked.shape[1]


@dataclass(frozen=True)
class ImputationConfig:
    direct_weight: float = 2.0
    diagonal_weight: float = 1.0
    noise_std: float = 0.01
    solver_tol: float = 1e-5
    max_iters: int = 0  # 0 means 10 * number of masked pixels

    def __post_init__(self):
        if self.direct_weight <= 0:
            raise InvalidArgumentError("direct neighbor weight must be > 0")
        if self.diagonal_weight < 0:
            raise InvalidArgumentError("diagonal neighbor weight must be >= 0")
        if self.noise_std < 0:
            raise InvalidArgumentError("noise std must be >= 0")
        if self.solver_tol <= 0:
            raise InvalidArgumentError("solver tolerance must be > 0")


def build_imputation_system(image: ImageTensor, mask: PixelMask, cfg: ImputationConfig):
    """Assemble the SPD system L x = b (one right-hand side per channel).

    L has the weighted-Laplacian structure over masked pixels; unmasked
    neighbors contribute Dirichlet terms to b. Returns (L, b, row_weight)
    where row_weight[p] is the total neighbor weight of masked pixel p.
    """
    h, w = mask.height, mask.width
    m = mask.masked
    rows, cols = np.nonzero(m)
    n = rows.shape[0]
    index_of = np.full((h, w), -1, dtype=np.int64)
    index_of[rows, cols] = np.arange(n)

    row_weight = np.zeros(n, dtype=np.float64)
    b = np.zeros((n, image.channels), dtype=np.float64)
    coo_i, coo_j, coo_v = [], [], []
    for offsets, weight in ((_DIRECT, cfg.direct_weight), (_DIAGONAL, cfg.diagonal_weight)):
        if weight == 0:
            continue
        for dy, dx in offsets:
            nr, nc = rows + dy, cols + dx
            inb = (nr >= 0) & (nr < h) & (nc >= 0) & (nc < w)
            row_weight[inb] += weight
            nri, nci = nr[inb], nc[inb]
            p = np.nonzero(inb)[0]
            neighbor_masked = m[nri, nci]
            coo_i.append(p[neighbor_masked])
            coo_j.append(index_of[nri[neighbor_masked], nci[neighbor_masked]])
            coo_v.append(np.full(int(neighbor_masked.sum()), -weight))
            free = ~neighbor_masked
            b[p[free]] += weight * image.data[nri[free], nci[free], :].astype(np.float64)
    coo_i.append(np.arange(n))
    coo_j.append(np.arange(n))
    coo_v.append(row_weight)
    matrix = sp.coo_matrix(
        (np.concatenate(coo_v), (np.concatenate(coo_i), np.concatenate(coo_j))), shape=(n, n)
    ).tocsr()
    return matrix, b, row_weight


def impute(image: ImageTensor, mask: PixelMask, cfg: ImputationConfig, seed: int = 0) -> ImageTensor:
    """Replace masked pixels with the noisy-linear-interpolation solution.

    Unmasked pixels pass through unchanged; the solution is clamped to [0,1].
    """
    if image.space is not ColorSpace.RAW01:
        raise InvalidArgumentError("imputation operates on raw [0,1] images")
    if (mask.height, mask.width) != (image.height, image.width):
        raise InvalidArgumentError("mask dims must match the image")
    m = mask.masked
    n_masked = int(m.sum())
    if n_masked == 0:
        return ImageTensor(image.data.copy(), ColorSpace.RAW01)
    if n_masked == m.size:
        raise SingularSystemError("every pixel is masked; no anchor values to interpolate from")

    matrix, b, row_weight = build_imputation_system(image, mask, cfg)
    if cfg.noise_std > 0:
        eps = philox(seed).normal(0.0, cfg.noise_std, n_masked)
        b = b + (row_weight * eps)[:, None]
    maxiter = cfg.max_iters if cfg.max_iters > 0 else 10 * n_masked
    # Warm start at the unmasked mean: for a constant image the initial residual
    # is already below tolerance, so the reconstruction is exact.
    anchor_mean = image.data[~m].astype(np.float64).mean(axis=0)

    solution = np.empty((n_masked, image.channels), dtype=np.float64)
    for ch in range(image.channels):
        rhs = b[:, ch]
        rhs_norm = float(np.linalg.norm(rhs))
        if rhs_norm == 0.0:
            solution[:, ch] = 0.0
            continue
        x0 = np.full(n_masked, anchor_mean[ch])
        x, info = spla.cg(matrix, rhs, x0=x0, rtol=cfg.solver_tol, atol=0.0, maxiter=maxiter)
        residual = float(np.linalg.norm(rhs - matrix @ x))
        if info != 0 or residual > cfg.solver_tol * rhs_norm * (1.0 + 1e-12):
            raise SolverFailureError(
                f"imputation solve did not converge within {maxiter} iterations", residual
            )
        solution[:, ch] = x

    out = image.data.copy()
    out[m] = np.clip(solution, 0.0, 1.0).astype(np.float32)
    return ImageTensor(out, ColorSpace.RAW01)


def top_fraction_mask(smap: SaliencyMap, fraction: float) -> PixelMask:
    """Mask the top `fraction` of pixels by saliency (row-major tie-breaks)."""
    if not 0.0 < fraction < 1.0:
        raise InvalidArgumentError("fraction must lie in (0, 1)")
    flat = smap.data.ravel()
    count = int(fraction * flat.shape[0])
    order = np.argsort(-flat, kind="stable")
    m = np.zeros(flat.shape[0], dtype=bool)
    m[order[:count]] = True
    return PixelMask(m.reshape(smap.height, smap.width))


def road_score(
    model: ModelAdapter,
    image: ImageTensor,
    smap: SaliencyMap,
    fractions,
    cfg: ImputationConfig,
    target: int,
    seed: int = 0,
    norm: NormalizationSpec = NormalizationSpec(),
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> float:
    """Mean target score after imputing away the top-f pixels, over all fractions (lower is better)."""
    fractions = list(fractions)
    if not fractions:
        raise InvalidArgumentError("need at least one fraction")
    if any(not 0.0 < f < 1.0 for f in fractions) or any(
        b <= a for a, b in zip(fractions, fractions[1:])
    ):
        raise InvalidArgumentError("fractions must be ascending and lie in (0, 1)")
    if not smap.postprocessed:
        raise InvalidStateError("ROAD expects a postprocessed map")
    if (smap.height, smap.width) != (image.height, image.width):
        raise InvalidArgumentError("saliency map dims must match the image")

    imputed = []
    for k, fraction in enumerate(fractions):
        mask = top_fraction_mask(smap, fraction)
        imputed.append(impute(image, mask, cfg, seed=seed * 1_000_003 + k).data)
    scores = score_raw(model, np.stack(imputed), target, norm, batch_size)
    return float(np.mean(scores))
