"""Compactly supported radial mollifier sampled on the grid.

The kernel for smoothing scale L has support radius
max(support_fraction * L, 2h): the paper-style radius L/6, floored at two
grid steps so the sampled kernel always has interior weight.  Discrete
normalization makes the kernel sum to one exactly, and symmetry of the
sample offsets reproduces affine fields exactly at interior points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import ndimage


def standard_bump(t: np.ndarray) -> np.ndarray:
    """exp(-1/(1-t^2)) on [0,1), zero outside."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = t < 1.0
    with np.errstate(divide="ignore", over="ignore"):
        out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


@dataclass(frozen=True)
class Mollifier:
    profile: Callable[[np.ndarray], np.ndarray] = standard_bump
    support_fraction: float = 1.0 / 6.0

    def __post_init__(self):
        if not (0 < self.support_fraction <= 1):
            raise ValueError("support_fraction must lie in (0, 1]")

    def kernel(self, dim: int, radius_in_cells: float) -> np.ndarray:
        """Normalized kernel on integer offsets with |o| < radius_in_cells."""
        if radius_in_cells <= 0:
            raise ValueError("kernel radius must be positive")
        half = int(np.ceil(radius_in_cells)) - 1
        half = max(half, 0)
        axes = [np.arange(-half, half + 1)] * dim
        mesh = np.meshgrid(*axes, indexing="ij")
        dist = np.sqrt(sum(m.astype(float) ** 2 for m in mesh))
        w = self.profile(dist / radius_in_cells)
        w[dist >= radius_in_cells] = 0.0
        total = w.sum()
        if total <= 0:
            raise ValueError("kernel radius too small: no interior weight")
        return w / total


_KERNEL_CACHE: dict[tuple, np.ndarray] = {}


def _cached_kernel(rho: Mollifier, dim: int, radius_in_cells: float) -> np.ndarray:
    key = (id(rho.profile), rho.support_fraction, dim, round(radius_in_cells, 12))
    if key not in _KERNEL_CACHE:
        _KERNEL_CACHE[key] = rho.kernel(dim, radius_in_cells)
    return _KERNEL_CACHE[key]


def kernel_radius_cells(scale: float, spacing: float, rho: Mollifier) -> float:
    """Support radius in grid steps: max(fraction*scale, 2h) / h."""
    if scale < spacing:
        raise ValueError(f"mollification scale {scale} under-resolved (h={spacing})")
    return max(rho.support_fraction * scale, 2.0 * spacing) / spacing


def mollify(values: np.ndarray, dim: int, scale: float, spacing: float,
            rho: Mollifier) -> tuple[np.ndarray, int]:
    """Convolve a node or cell lattice field with the sampled kernel.

    The first ``dim`` axes of ``values`` are lattice axes; trailing axes
    are components.  Returns ``(out, margin)``: entries farther than
    ``margin`` lattice steps from every lattice boundary are exact
    convolutions; closer entries read zero padding and are not defined.
    """
    radius = kernel_radius_cells(scale, spacing, rho)
    kern = _cached_kernel(rho, dim, radius)
    margin = (kern.shape[0] - 1) // 2
    flat_comps = values.reshape(values.shape[:dim] + (-1,))
    out = np.empty_like(flat_comps, dtype=float)
    for c in range(flat_comps.shape[-1]):
        out[..., c] = ndimage.convolve(flat_comps[..., c], kern, mode="constant")
    return out.reshape(values.shape), margin
