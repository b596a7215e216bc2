"""
Fast ball kernels on the uniform cell grid.

A discrete ball of radius t around a cell contains the cells whose centres
lie at distance < t. In cell units the member offsets are the integer
vectors k with |k| < t/h, which we store row by row: for each offset d along
axis 0 the admissible offsets along the last axis form one interval
[-m_d, m_d]. Sums over balls then reduce to prefix sums along the last axis
(a summed-area table per row) and extrema to 1D running max/min filters.
Balls are clipped to the box: out-of-box offsets are simply absent.
"""
import math
from typing import Dict, Iterator, Tuple

import numpy as np
from scipy import ndimage

from .cache import stencil_cache

SNAP_RTOL = 1e-9


def snap_radius(radius_cells: float) -> float:
    """Snap a radius (in cell units) to the nearest integer when it is one up to rounding."""
    nearest = round(radius_cells)
    if abs(radius_cells - nearest) <= SNAP_RTOL * max(1.0, radius_cells):
        return float(nearest)
    return float(radius_cells)


def largest_below(q: float) -> int:
    """Largest integer k >= 0 with k*k < q, or -1 if q <= 0."""
    if q <= 0.0:
        return -1
    k = int(math.sqrt(q))
    while k > 0 and k * k >= q:
        k -= 1
    while (k + 1) * (k + 1) < q:
        k += 1
    return k


class BallStencil:
    """Row decomposition of the offsets of a discrete ball."""

    __slots__ = ("dim", "radius_cells", "rows", "reach")

    def __init__(self, dim: int, radius_cells: float):
        radius = snap_radius(radius_cells)
        r2 = radius * radius
        if dim == 1:
            rows = ((0, largest_below(r2)),)
        else:
            reach = largest_below(r2)
            rows = tuple((d, largest_below(r2 - d * d)) for d in range(-reach, reach + 1))
        self.dim = dim
        self.radius_cells = radius
        self.rows: Tuple[Tuple[int, int], ...] = rows
        self.reach = max(m for _, m in rows)

    def offsets(self) -> Iterator[Tuple[int, ...]]:
        """Iterate over all member offsets."""
        for d, m in self.rows:
            for k in range(-m, m + 1):
                yield (k,) if self.dim == 1 else (d, k)

    def size(self) -> int:
        """Number of offsets of the unclipped ball."""
        return sum(2 * m + 1 for _, m in self.rows)


def get_stencil(dim: int, radius_cells: float) -> BallStencil:
    """Cached stencil for a radius given in cell units."""
    key = ("stencil", dim, snap_radius(radius_cells))
    return stencil_cache.get_or_build(key, lambda: BallStencil(dim, radius_cells))


def _interval_bounds(n: int, m: int) -> Tuple[np.ndarray, np.ndarray]:
    idx = np.arange(n)
    return np.clip(idx - m, 0, n - 1), np.clip(idx + m, 0, n - 1)


def _shift_rows(target: np.ndarray, rows: np.ndarray, d: int, combine) -> None:
    """target[i] = combine(target[i], rows[i + d]) for every i with i + d in range."""
    n0 = target.shape[0]
    if d >= 0:
        combine(target[: n0 - d], rows[d:], out=target[: n0 - d])
    else:
        combine(target[-d:], rows[: n0 + d], out=target[-d:])


def ball_sums(values: np.ndarray, stencil: BallStencil) -> np.ndarray:
    """
    Sum of `values` over the clipped ball around every cell.

    Args:
        values: Cell values, shape (N,) or (N, N)
        stencil: Ball stencil in cell units

    Returns:
        Array of the same shape holding sum over members for each centre
    """
    values = np.asarray(values, dtype=float)
    n_last = values.shape[-1]
    prefix = np.zeros(values.shape[:-1] + (n_last + 1,))
    np.cumsum(values, axis=-1, out=prefix[..., 1:])

    if values.ndim == 1:
        lo, hi = _interval_bounds(n_last, stencil.rows[0][1])
        return prefix[hi + 1] - prefix[lo]

    out = np.zeros_like(values)
    row_sums: Dict[int, np.ndarray] = {}
    for d, m in stencil.rows:
        if m not in row_sums:
            lo, hi = _interval_bounds(n_last, m)
            row_sums[m] = prefix[:, hi + 1] - prefix[:, lo]
        _shift_rows(out, row_sums[m], d, np.add)
    return out


def ball_counts(shape: Tuple[int, ...], stencil: BallStencil) -> np.ndarray:
    """Number of in-box member cells of the ball around every cell (cached)."""
    key = ("counts", tuple(shape), stencil.dim, stencil.radius_cells)

    def build() -> np.ndarray:
        counts = ball_sums(np.ones(shape), stencil)
        counts.setflags(write=False)
        return counts

    return stencil_cache.get_or_build(key, build)


def ball_extreme(values: np.ndarray, stencil: BallStencil, mode: str = "max") -> np.ndarray:
    """
    Maximum (or minimum) of `values` over the clipped ball around every cell.

    Entries equal to -inf (resp. +inf) act as absent cells, which is how
    centre masks of a ball family are applied.
    """
    values = np.asarray(values, dtype=float)
    if mode == "max":
        filt, combine, fill = ndimage.maximum_filter1d, np.maximum, -np.inf
    else:
        filt, combine, fill = ndimage.minimum_filter1d, np.minimum, np.inf

    if values.ndim == 1:
        m = stencil.rows[0][1]
        return filt(values, size=2 * m + 1, mode="constant", cval=fill)

    out = np.full_like(values, fill)
    row_ext: Dict[int, np.ndarray] = {}
    for d, m in stencil.rows:
        if m not in row_ext:
            row_ext[m] = filt(values, size=2 * m + 1, axis=-1, mode="constant", cval=fill)
        _shift_rows(out, row_ext[m], d, combine)
    return out


def unclipped_centres(shape: Tuple[int, ...], stencil: BallStencil) -> np.ndarray:
    """Boolean mask of centres whose ball lies entirely inside the box."""
    reach = stencil.reach
    mask = np.ones(shape, dtype=bool)
    for axis, n in enumerate(shape):
        idx = np.arange(n)
        ok = (idx >= reach) & (idx <= n - 1 - reach)
        expand = [np.newaxis] * len(shape)
        expand[axis] = slice(None)
        mask &= ok[tuple(expand)]
    return mask
