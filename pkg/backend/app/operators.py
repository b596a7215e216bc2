"""
Base-space operators (maximal, fractional, Riesz potential, Hilbert),
operator families T_t, their slice-wise extension to the half-space and
off-diagonal decay profiling.
"""
import logging
import math
from functools import lru_cache
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import integrate, signal

from .errors import ParameterError, UnsupportedFamilyError, require
from .grid import Box, GridFn, HalfSpaceFn, ball_averages, lp_norm
from .schemas import OffDiagPoint, OffDiagProfile
from .stencil import ball_counts, ball_extreme, ball_sums
from .weights import BallFamily, Weight

logger = logging.getLogger(__name__)

FIT_FLOOR = 1e-14
DIRECT_CONVOLUTION_CELLS = 1024

BaseOperator = Literal["maximal", "frac_maximal", "hilbert", "riesz"]


def _check_alpha(alpha: float, dim: int) -> None:
    require(0 < alpha < dim, f"Order alpha must lie in (0, {dim}), got {alpha}")


def _radius_maximal(f: GridFn, family: Optional[BallFamily], radius_power: float) -> GridFn:
    """Uncentred maximal average, each ball average multiplied by radius**radius_power."""
    box = f.box
    family = family or BallFamily.dyadic(box)
    require(family.box == box, "Function and ball family live on different boxes")
    magnitude = np.abs(f.values)
    out = np.full(box.shape, -np.inf)
    for radius, mask in zip(family.radii, family.masks):
        if not np.any(mask):
            continue
        stencil = box.stencil(radius)
        averages = ball_sums(magnitude, stencil) / ball_counts(box.shape, stencil)
        if radius_power:
            averages = averages * radius ** radius_power
        # x lies in B(c, r) iff c lies in B(x, r): spread each ball value over its members
        spread = ball_extreme(np.where(mask, averages, -np.inf), stencil, "max")
        np.maximum(out, spread, out=out)
    out[~np.isfinite(out)] = 0.0
    return f.with_values(out)


def maximal(f: GridFn, family: Optional[BallFamily] = None) -> GridFn:
    """
    Uncentred Hardy-Littlewood maximal function over a ball family.

    Mf(x) is the largest average of |f| over family balls containing x;
    cells covered by no family ball get 0.

    Args:
        f: Sampled function
        family: Ball family, dyadic radii on all cells by default
    """
    return _radius_maximal(f, family, 0.0)


def frac_maximal(f: GridFn, alpha: float, family: Optional[BallFamily] = None) -> GridFn:
    """
    Fractional maximal function M_alpha f(x) = max over containing balls of t^alpha * avg_B |f|.

    Raises:
        ParameterError: If alpha is outside (0, n)
    """
    _check_alpha(alpha, f.box.dim)
    return _radius_maximal(f, family, alpha)


def maximal_opnorm_estimate(
    w: Weight,
    p: float,
    probes: Sequence[GridFn],
    family: Optional[BallFamily] = None,
    safety: float = 2.0,
) -> float:
    """
    Empirical operator norm of M on L^p(w) times a safety factor.

    Args:
        w: Weight
        p: Exponent > 1
        probes: Non-zero test functions
        family: Ball family of the maximal operator
        safety: Multiplier applied to the largest observed ratio

    Raises:
        ParameterError: If probes is empty, all probes vanish or p <= 1
    """
    require(len(probes) > 0, "Operator norm estimate needs at least one probe")
    require(p > 1, f"Operator norm estimate needs p > 1, got {p}")
    best = 0.0
    for probe in probes:
        denominator = lp_norm(probe, p, w)
        if denominator == 0.0:
            continue
        best = max(best, lp_norm(maximal(probe, family), p, w) / denominator)
    require(best > 0.0, "Every probe vanishes")
    return safety * best


@lru_cache(maxsize=64)
def _self_cell_integral(dim: int, alpha: float, h: float) -> float:
    """Integral of |z|^{alpha-n} over one cell centred at the origin."""
    half = h / 2.0
    if dim == 1:
        return 2.0 * half ** alpha / alpha
    angular, _ = integrate.quad(lambda theta: math.cos(theta) ** (-alpha), 0.0, math.pi / 4.0, epsabs=0.0, epsrel=1e-13)
    return 8.0 * half ** alpha / alpha * angular


def _offset_grid(box: Box) -> Tuple[np.ndarray, ...]:
    """Offsets -(N-1)..(N-1) per axis in physical units, broadcast."""
    n = box.cells_per_axis
    axis = np.arange(-(n - 1), n) * box.h
    if box.dim == 1:
        return (axis,)
    return tuple(np.meshgrid(axis, axis, indexing="ij"))


def _convolve_offsets(values: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """
    out[i] = sum_j values[j] * kernel[i - j] with kernel indexed by offsets -(N-1)..(N-1).

    Direct summation for small grids, FFT otherwise; both are deterministic
    for fixed inputs.
    """
    n = values.shape[0]
    method = "direct" if values.size <= DIRECT_CONVOLUTION_CELLS or values.ndim == 1 else "fft"
    full = signal.convolve(values, kernel, mode="full", method=method)
    window = tuple(slice(n - 1, 2 * n - 1) for _ in range(values.ndim))
    return full[window]


def riesz_potential(f: GridFn, alpha: float) -> GridFn:
    """
    Riesz potential I_alpha f(x) = sum_y |x - y|^{alpha-n} f(y) h^n (no normalising constant).

    The self-cell term uses the exact integral of |z|^{alpha-n} over the cell.

    Raises:
        ParameterError: If alpha is outside (0, n)
    """
    box = f.box
    _check_alpha(alpha, box.dim)
    offsets = _offset_grid(box)
    distance = np.sqrt(sum(o * o for o in offsets))
    centre = tuple(box.cells_per_axis - 1 for _ in range(box.dim))
    distance[centre] = 1.0
    kernel = distance ** (alpha - box.dim)
    kernel[centre] = _self_cell_integral(box.dim, alpha, box.h) / box.cell_volume
    return f.with_values(_convolve_offsets(f.values, kernel) * box.cell_volume)


def hilbert(f: GridFn) -> GridFn:
    """
    Discrete Hilbert transform Hf(x) = sum_{y != x} f(y) h / (x - y) (no 1/pi).

    Raises:
        ParameterError: If the box is not one-dimensional
    """
    require(f.box.dim == 1, "The Hilbert transform is only defined for n = 1")
    n = f.box.cells_per_axis
    offsets = np.arange(-(n - 1), n, dtype=float)
    kernel = np.zeros_like(offsets)
    nonzero = offsets != 0
    kernel[nonzero] = 1.0 / offsets[nonzero]
    return f.with_values(_convolve_offsets(f.values, kernel))


def heat(f: GridFn, t: float) -> GridFn:
    """
    Gaussian smoothing with g_t(z) = (4 pi t^2)^{-n/2} exp(-|z|^2 / (4 t^2)),
    renormalised per output cell to unit mass on the box.
    """
    require(t > 0, f"Heat scale must be positive, got {t}")
    box = f.box
    offsets = _offset_grid(box)
    squared = sum(o * o for o in offsets)
    kernel = (4.0 * math.pi * t * t) ** (-box.dim / 2.0) * np.exp(-squared / (4.0 * t * t))
    numerator = _convolve_offsets(f.values, kernel)
    mass = _convolve_offsets(np.ones(box.shape), kernel)
    return f.with_values(numerator / mass)


class OperatorFamily(BaseModel):
    """A family (T_t)_{t>0}: averaging, heat, identity, or a constant base operator."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    tag: Literal["averaging", "heat", "identity", "constant"]
    base: Optional[BaseOperator] = Field(None, description="Wrapped operator for constant families")
    alpha: Optional[float] = Field(None, description="Order for riesz / frac_maximal")
    family: Optional[BallFamily] = Field(None, description="Ball family for maximal operators")

    @model_validator(mode="after")
    def _check(self) -> "OperatorFamily":
        if self.tag == "constant" and self.base is None:
            raise ValueError("Constant operator families need a base operator")
        if self.base in ("riesz", "frac_maximal") and self.alpha is None:
            raise ValueError(f"{self.base} needs an order alpha")
        return self

    @classmethod
    def averaging(cls) -> "OperatorFamily":
        return cls(tag="averaging")

    @classmethod
    def heat(cls) -> "OperatorFamily":
        return cls(tag="heat")

    @classmethod
    def identity(cls) -> "OperatorFamily":
        return cls(tag="identity")

    @classmethod
    def constant(cls, base: BaseOperator, alpha: Optional[float] = None, family: Optional[BallFamily] = None) -> "OperatorFamily":
        return cls(tag="constant", base=base, alpha=alpha, family=family)

    @property
    def linear(self) -> bool:
        return not (self.tag == "constant" and self.base in ("maximal", "frac_maximal"))

    @property
    def name(self) -> str:
        if self.tag != "constant":
            return self.tag
        return self.base if self.alpha is None else f"{self.base}({self.alpha:g})"


def family_apply(fam: OperatorFamily, t: float, f: GridFn) -> GridFn:
    """
    Apply T_t to a base-space function.

    Raises:
        ParameterError: If t <= 0
    """
    require(t > 0, f"Scale t must be positive, got {t}")
    if fam.tag == "identity":
        return f
    if fam.tag == "averaging":
        return ball_averages(f, t)
    if fam.tag == "heat":
        return heat(f, t)
    if fam.base == "maximal":
        return maximal(f, fam.family if fam.family is not None and fam.family.box == f.box else None)
    if fam.base == "frac_maximal":
        return frac_maximal(f, fam.alpha, fam.family if fam.family is not None and fam.family.box == f.box else None)
    if fam.base == "hilbert":
        return hilbert(f)
    return riesz_potential(f, fam.alpha)


def extend_slicewise(fam: OperatorFamily, F: HalfSpaceFn) -> HalfSpaceFn:
    """Half-space extension: level k of the output is T_{t_k}(F(., t_k))."""
    slices = [family_apply(fam, t, f).values for t, f in F.slices()]
    return HalfSpaceFn.from_slices(F.box, F.tlevels, slices)


class OffDiagGeometry(BaseModel):
    """Strips E = {x_1 >= c + g/2}, F = {x_1 < c - g/2} (in whole cells) probed at scale t."""
    gap_cells: int = Field(..., ge=0, description="Number of cells separating E and F")
    t: float = Field(..., gt=0)

    def sets(self, box: Box) -> Tuple[np.ndarray, np.ndarray, float]:
        """Boolean masks of E and F and the exact distance d(E, F) = gap_cells * h."""
        n = box.cells_per_axis
        last_f = n // 2 - 1 - self.gap_cells // 2
        first_e = last_f + self.gap_cells + 1
        require(last_f >= 0 and first_e <= n - 1, "Gap does not fit inside the box")
        index = np.arange(n)
        f_axis, e_axis = index <= last_f, index >= first_e
        if box.dim == 2:
            f_axis = np.broadcast_to(f_axis[:, None], box.shape)
            e_axis = np.broadcast_to(e_axis[:, None], box.shape)
        return e_axis, f_axis, self.gap_cells * box.h


def _fit_decay(points: List[OffDiagPoint]) -> Tuple[float, float, int]:
    usable = [pt for pt in points if pt.d > 0 and pt.ratio > FIT_FLOOR]
    if not usable:
        return math.inf, 0.0, 0
    x = np.array([-math.log1p(pt.d / pt.t) for pt in usable])
    y = np.array([math.log(pt.ratio) for pt in usable])
    if len(usable) == 1 or np.ptp(x) == 0.0:
        # single abscissa: decay order with unit constant
        return float(np.min(y / x)), 0.0, len(usable)
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return float(slope), residual, len(usable)


def offdiag_profile(
    fam: OperatorFamily,
    r: float,
    probes: Sequence[GridFn],
    geometry: Sequence[OffDiagGeometry],
) -> OffDiagProfile:
    """
    Measure ||1_E T_t(1_F f)||_r / ||1_F f||_r over probes for each geometry and fit
    the decay order M from log(ratio) ~ -M log(1 + d/t).

    Raises:
        UnsupportedFamilyError: If the family is sublinear
        ParameterError: If r < 1 or no probe is non-zero on F
    """
    if not fam.linear:
        raise UnsupportedFamilyError(f"Off-diagonal profiling needs a linear family, got {fam.name}")
    require(r >= 1, f"Exponent r must be >= 1, got {r}")
    require(len(probes) > 0, "Off-diagonal profiling needs probes")
    points = []
    for geo in geometry:
        box = probes[0].box
        e_mask, f_mask, d = geo.sets(box)
        best = None
        for probe in probes:
            local = probe.with_values(np.where(f_mask, probe.values, 0.0))
            denominator = lp_norm(local, r)
            if denominator == 0.0:
                continue
            image = family_apply(fam, geo.t, local)
            numerator = lp_norm(image.with_values(np.where(e_mask, image.values, 0.0)), r)
            ratio = numerator / denominator
            best = ratio if best is None else max(best, ratio)
        if best is None:
            raise ParameterError("No probe is non-zero on F")
        points.append(OffDiagPoint(t=geo.t, d=d, ratio=best))
    m_fit, residual, fitted = _fit_decay(points)
    logger.debug(f"offdiag {fam.name}: M_fit={m_fit} from {fitted} points")
    return OffDiagProfile(r=r, points=points, m_fit=m_fit, residual=residual, fitted_points=fitted)
