"""
Discretized domains in R^n and the upper half-space, ball geometry and
base-space (quasi-)norms.

All averages use the discrete ball measure |B|_d = (in-box member count) * h^n
so that reassociated sums (Fubini) agree exactly.
"""
import math
from typing import TYPE_CHECKING, Iterable, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import require
from .stencil import (
    BallStencil,
    ball_counts,
    ball_sums,
    get_stencil,
)

if TYPE_CHECKING:
    from .weights import Weight

WEAK = math.inf

ARRAY_MODEL = ConfigDict(frozen=True, arbitrary_types_allowed=True)


def _frozen_array(values, shape: Optional[Tuple[int, ...]] = None) -> np.ndarray:
    array = np.array(values, dtype=float)
    if shape is not None and array.shape != shape:
        array = array.reshape(shape)
    array.setflags(write=False)
    return array


class Box(BaseModel):
    """Cube [-L, L]^n split into N cells per axis."""
    model_config = ConfigDict(frozen=True)

    dim: Literal[1, 2] = Field(..., description="Dimension n")
    half_width: float = Field(..., gt=0, description="Half side length L")
    cells_per_axis: int = Field(..., ge=2, description="Cells per axis N")

    @property
    def h(self) -> float:
        """Cell width 2L/N."""
        return 2.0 * self.half_width / self.cells_per_axis

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.cells_per_axis,) * self.dim

    @property
    def measure(self) -> float:
        """Lebesgue measure of the box, (2L)^n."""
        return (2.0 * self.half_width) ** self.dim

    @property
    def axis_centres(self) -> np.ndarray:
        """Cell centres along one axis, x_i = -L + (i + 1/2) h."""
        return -self.half_width + (np.arange(self.cells_per_axis) + 0.5) * self.h

    def coordinates(self) -> Tuple[np.ndarray, ...]:
        """Per-axis coordinate arrays broadcast to the grid shape."""
        axis = self.axis_centres
        if self.dim == 1:
            return (axis,)
        return tuple(np.meshgrid(axis, axis, indexing="ij"))

    def radius(self) -> np.ndarray:
        """|x| at every cell centre."""
        coords = self.coordinates()
        return np.sqrt(sum(c * c for c in coords))

    def radius_in_cells(self, t: float) -> float:
        return t / self.h

    def stencil(self, t: float) -> BallStencil:
        """Ball stencil for a radius t given in physical units."""
        require(t > 0, f"Ball radius must be positive, got {t}")
        return get_stencil(self.dim, self.radius_in_cells(t))

    def cell_index(self, point: Union[float, Iterable[float]]) -> Tuple[int, ...]:
        """Index of the cell containing a point (clamped to the box)."""
        coords = np.atleast_1d(np.asarray(point, dtype=float))
        require(coords.size == self.dim, "Point dimension does not match the box")
        idx = np.floor((coords + self.half_width) / self.h).astype(int)
        idx = np.clip(idx, 0, self.cells_per_axis - 1)
        return tuple(int(i) for i in idx)

    def refine(self, factor: int = 2) -> "Box":
        return Box(dim=self.dim, half_width=self.half_width, cells_per_axis=self.cells_per_axis * factor)


class GridFn(BaseModel):
    """Piecewise constant function sampled on the cells of a box."""
    model_config = ARRAY_MODEL

    box: Box
    values: np.ndarray = Field(..., description="Cell values, shape box.shape")

    @model_validator(mode="before")
    @classmethod
    def _coerce_values(cls, data):
        if isinstance(data, dict) and "values" in data and "box" in data:
            shape = Box.model_validate(data["box"]).shape
            data = {**data, "values": _frozen_array(data["values"], shape)}
        return data

    @field_validator("values")
    @classmethod
    def _finite(cls, values: np.ndarray) -> np.ndarray:
        if not np.all(np.isfinite(values)):
            raise ValueError("GridFn values must be finite")
        return values

    @classmethod
    def zeros(cls, box: Box) -> "GridFn":
        return cls(box=box, values=np.zeros(box.shape))

    @classmethod
    def constant(cls, box: Box, value: float) -> "GridFn":
        return cls(box=box, values=np.full(box.shape, float(value)))

    def with_values(self, values: np.ndarray) -> "GridFn":
        return GridFn(box=self.box, values=values)

    def abs(self) -> "GridFn":
        return self.with_values(np.abs(self.values))

    def __add__(self, other: "GridFn") -> "GridFn":
        return self.with_values(self.values + other.values)

    def __mul__(self, scalar: float) -> "GridFn":
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__


class TLevels(BaseModel):
    """Log-spaced heights t_k = t_min (t_max/t_min)^{(k+1/2)/K}."""
    model_config = ConfigDict(frozen=True)

    t_min: float = Field(..., gt=0, description="Lower truncation of the height")
    t_max: float = Field(..., gt=0, description="Upper truncation of the height")
    count: int = Field(..., ge=1, description="Number of levels K")

    @model_validator(mode="after")
    def _ordered(self) -> "TLevels":
        if not self.t_min < self.t_max:
            raise ValueError("t_min must be smaller than t_max")
        return self

    @property
    def delta(self) -> float:
        """Log-step ln(t_max/t_min)/K, the dt/t weight of one band."""
        return math.log(self.t_max / self.t_min) / self.count

    @property
    def levels(self) -> np.ndarray:
        k = np.arange(self.count)
        return _frozen_array(self.t_min * (self.t_max / self.t_min) ** ((k + 0.5) / self.count))

    def refine(self, factor: int = 2) -> "TLevels":
        return TLevels(t_min=self.t_min, t_max=self.t_max, count=self.count * factor)


class HalfSpaceFn(BaseModel):
    """Function on cells x t-bands; values have shape (K,) + box.shape."""
    model_config = ARRAY_MODEL

    box: Box
    tlevels: TLevels
    values: np.ndarray = Field(..., description="Samples F(y, t_k), level axis first")

    @model_validator(mode="before")
    @classmethod
    def _coerce_values(cls, data):
        if isinstance(data, dict) and {"values", "box", "tlevels"} <= set(data):
            shape = (TLevels.model_validate(data["tlevels"]).count,) + Box.model_validate(data["box"]).shape
            data = {**data, "values": _frozen_array(data["values"], shape)}
        return data

    @field_validator("values")
    @classmethod
    def _finite(cls, values: np.ndarray) -> np.ndarray:
        if not np.all(np.isfinite(values)):
            raise ValueError("HalfSpaceFn values must be finite")
        return values

    @classmethod
    def from_slices(cls, box: Box, tlevels: TLevels, slices: Iterable[np.ndarray]) -> "HalfSpaceFn":
        return cls(box=box, tlevels=tlevels, values=np.stack([np.asarray(s, dtype=float) for s in slices]))

    @classmethod
    def constant_in_t(cls, f: GridFn, tlevels: TLevels) -> "HalfSpaceFn":
        return cls.from_slices(f.box, tlevels, [f.values] * tlevels.count)

    def slice(self, k: int) -> GridFn:
        return GridFn(box=self.box, values=self.values[k])

    def slices(self) -> Iterable[Tuple[float, GridFn]]:
        for k, t in enumerate(self.tlevels.levels):
            yield float(t), self.slice(k)

    def with_values(self, values: np.ndarray) -> "HalfSpaceFn":
        return HalfSpaceFn(box=self.box, tlevels=self.tlevels, values=values)

    def abs(self) -> "HalfSpaceFn":
        return self.with_values(np.abs(self.values))

    def __add__(self, other: "HalfSpaceFn") -> "HalfSpaceFn":
        return self.with_values(self.values + other.values)

    def __mul__(self, scalar: float) -> "HalfSpaceFn":
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__


class DiscreteBall(BaseModel):
    """Cells whose centres lie at distance < t from a centre cell, clipped to the box."""
    model_config = ARRAY_MODEL

    box: Box
    center: Tuple[int, ...]
    radius: float = Field(..., gt=0)
    members: np.ndarray = Field(..., description="Member cell indices, shape (count, n)")

    @property
    def count(self) -> int:
        return int(self.members.shape[0])

    @property
    def measure(self) -> float:
        """|B|_d = count * h^n."""
        return self.count * self.box.cell_volume

    def mask(self) -> np.ndarray:
        out = np.zeros(self.box.shape, dtype=bool)
        out[tuple(self.members.T)] = True
        return out


def discrete_ball(box: Box, center: Tuple[int, ...], t: float) -> DiscreteBall:
    """
    Enumerate the member cells of B_d(center, t).

    Args:
        box: Grid
        center: Centre cell index
        t: Radius (physical units)

    Returns:
        DiscreteBall with at least the centre cell
    """
    stencil = box.stencil(t)
    centre = np.asarray(center, dtype=int)
    members = [centre + np.asarray(offset) for offset in stencil.offsets()]
    members = np.array(
        [m for m in members if np.all(m >= 0) and np.all(m < box.cells_per_axis)], dtype=int
    ).reshape(-1, box.dim)
    return DiscreteBall(box=box, center=tuple(int(c) for c in centre), radius=t, members=members)


def ball_averages(f: GridFn, t: float) -> GridFn:
    """Discrete ball average of f around every cell for radius t."""
    stencil = f.box.stencil(t)
    sums = ball_sums(f.values, stencil)
    return f.with_values(sums / ball_counts(f.box.shape, stencil))


def ball_average(f: GridFn, x: Tuple[int, ...], t: float) -> float:
    """
    Average of f over the discrete ball B_d(x, t).

    Args:
        f: Sampled function
        x: Centre cell index
        t: Radius, must be positive

    Returns:
        (1/|B|_d) * sum over members of f * h^n

    Raises:
        ParameterError: If t <= 0
    """
    require(t > 0, f"Ball radius must be positive, got {t}")
    ball = discrete_ball(f.box, x, t)
    return float(np.mean(f.values[tuple(ball.members.T)]))


def _weight_values(box: Box, w: Optional["Weight"]) -> np.ndarray:
    if w is None:
        return np.ones(box.shape)
    return w.values


def lp_norm(f: GridFn, p: float, w: Optional["Weight"] = None) -> float:
    """
    Weighted L^p (quasi-)norm (sum |f|^p w h^n)^{1/p}.

    Args:
        f: Sampled function
        p: Exponent in (0, inf)
        w: Weight on the same box, Lebesgue measure if None

    Raises:
        ParameterError: If p <= 0
    """
    require(p > 0, f"Exponent p must be positive, got {p}")
    total = float(np.sum(np.abs(f.values) ** p * _weight_values(f.box, w)) * f.box.cell_volume)
    return total ** (1.0 / p)


def weighted_measure(cells: np.ndarray, w: Optional["Weight"], box: Box) -> float:
    """
    w(E) for a set of cells given as a boolean mask.

    Args:
        cells: Boolean mask of shape box.shape
        w: Weight, Lebesgue measure if None
        box: Grid the mask lives on
    """
    cells = np.asarray(cells, dtype=bool)
    return float(np.sum(_weight_values(box, w)[cells]) * box.cell_volume)


def lorentz_quasinorm(f: GridFn, p: float, s: float, w: Optional["Weight"] = None) -> float:
    """
    Weighted Lorentz quasinorm ||f||_{L^{p,s}(w)}, exact for step functions.

    For finite s this is (int_0^inf (u^{1/p} f*(u))^s du/u)^{1/s} with f* the
    decreasing rearrangement with respect to w; for s = inf (use WEAK) it is
    sup_lambda lambda * w({|f| > lambda})^{1/p}, attained as lambda increases
    to one of the sample values.

    Raises:
        ParameterError: If p <= 0 or s <= 0
    """
    require(p > 0, f"Exponent p must be positive, got {p}")
    require(s > 0, f"Exponent s must be positive or infinite, got {s}")
    magnitudes = np.abs(f.values).ravel()
    masses = (_weight_values(f.box, w) * f.box.cell_volume).ravel()
    order = np.argsort(-magnitudes, kind="stable")
    levels = magnitudes[order]
    cumulative = np.cumsum(masses[order])
    positive = levels > 0
    if not np.any(positive):
        return 0.0
    levels, cumulative = levels[positive], cumulative[positive]

    if math.isinf(s):
        return float(np.max(levels * cumulative ** (1.0 / p)))

    previous = np.concatenate(([0.0], cumulative[:-1]))
    exponent = s / p
    pieces = levels ** s * (p / s) * (cumulative ** exponent - previous ** exponent)
    return float(np.sum(pieces)) ** (1.0 / s)
