"""
Cone functionals, weighted tent and Lorentz-tent norms, the discrete Fubini
identity and change of aperture.

The t-axis uses the midpoint rule in log t: level k carries weight
delta = ln(t_max/t_min)/K and F is constant on each band, so dt/t sums are
exact reassociations of the same finite sum.
"""
import logging
import math
from typing import List, Literal, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .cache import stencil_cache
from .errors import DegenerateInputError, require
from .grid import Box, GridFn, HalfSpaceFn, TLevels, lorentz_quasinorm, lp_norm
from .stencil import BallStencil, ball_counts, ball_sums
from .utils import TINY
from .weights import Weight, averaged_weight

logger = logging.getLogger(__name__)

UNIT_BALL_VOLUME = {1: 2.0, 2: math.pi}

ConeMode = Literal["fubini", "continuum"]


class ConeQuadrature(BaseModel):
    """Per-level ball stencils and discrete measures of the cone {|x - y| < beta t_k}."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    box: Box
    tlevels: TLevels
    beta: float = Field(..., gt=0, description="Aperture")
    stencils: Tuple[BallStencil, ...]
    counts: Tuple[np.ndarray, ...] = Field(..., description="In-box member counts per level, read-only")

    @property
    def measures(self) -> List[np.ndarray]:
        """|B_d(x, beta t_k)| per level."""
        return [c * self.box.cell_volume for c in self.counts]


def cone_quadrature(box: Box, tlevels: TLevels, beta: float) -> ConeQuadrature:
    """Build (or fetch from the shared cache) the quadrature for a grid and aperture."""
    require(beta > 0, f"Aperture must be positive, got {beta}")

    def build() -> ConeQuadrature:
        stencils = tuple(box.stencil(beta * t) for t in tlevels.levels)
        counts = tuple(ball_counts(box.shape, s) for s in stencils)
        logger.debug(f"cone quadrature N={box.cells_per_axis} K={tlevels.count} beta={beta:g}")
        return ConeQuadrature(box=box, tlevels=tlevels, beta=beta, stencils=stencils, counts=counts)

    return stencil_cache.get_or_build(("cone", box, tlevels, float(beta)), build)


def cone_functional(F: HalfSpaceFn, r: float, beta: float = 1.0, mode: ConeMode = "fubini") -> GridFn:
    """
    Conical functional A_r^beta F at every cell.

    In "fubini" mode A^r(x) = sum_k delta t_k^{-n} sum_{y in B_d(x, beta t_k)} |F(y, t_k)|^r h^n,
    i.e. the continuum factor v_n (beta t)^n is replaced by the discrete ball
    measure. In "continuum" mode the ball average is multiplied by v_n beta^n.

    Args:
        F: Half-space samples
        r: Exponent > 0
        beta: Aperture > 0
        mode: "fubini" (exact Fubini identity) or "continuum" (closed-form comparisons)

    Raises:
        ParameterError: If r <= 0 or beta <= 0
    """
    require(r > 0, f"Exponent r must be positive, got {r}")
    require(mode in ("fubini", "continuum"), f"Unknown cone mode '{mode}'")
    box, tlevels = F.box, F.tlevels
    quad = cone_quadrature(box, tlevels, beta)
    powered = np.abs(F.values) ** r
    total = np.zeros(box.shape)
    for k, t in enumerate(tlevels.levels):
        sums = ball_sums(powered[k], quad.stencils[k])
        if mode == "fubini":
            total += sums * (box.cell_volume / t ** box.dim)
        else:
            total += sums / quad.counts[k] * (UNIT_BALL_VOLUME[box.dim] * beta ** box.dim)
    total *= tlevels.delta
    return GridFn(box=box, values=total ** (1.0 / r))


def tent_norm(F: HalfSpaceFn, r: float, p: float, w: Weight, beta: float = 1.0) -> float:
    """||F||_{T_r^p(w)} = ||A_r F||_{L^p(w)}."""
    return lp_norm(cone_functional(F, r, beta), p, w)


def tent_lorentz_norm(F: HalfSpaceFn, r: float, p: float, s: float, w: Weight, beta: float = 1.0) -> float:
    """||F||_{T_r^{p,s}(w)} = ||A_r F||_{L^{p,s}(w)}; s = inf gives the weak norm."""
    return lorentz_quasinorm(cone_functional(F, r, beta), p, s, w)


def fubini_identity_residual(F: HalfSpaceFn, r: float, w: Weight) -> Tuple[float, float, float]:
    """
    Both sides of ||A_r F||_{L^r(w)}^r = sum_k delta ||F(., t_k)||_{L^r(W_{t_k} |B_d|/t_k^n)}^r.

    Returns:
        (lhs, rhs, relative error)
    """
    box = F.box
    lhs = tent_norm(F, r, r, w) ** r
    rhs = 0.0
    for k, t in enumerate(F.tlevels.levels):
        shadow = ball_counts(box.shape, box.stencil(t)) * box.cell_volume / t ** box.dim
        fold = Weight(box=box, values=averaged_weight(w, t).values * shadow, descriptor=f"W_{t:g}|B|/t^n")
        rhs += F.tlevels.delta * lp_norm(F.slice(k), r, fold) ** r
    rel_error = abs(lhs - rhs) / max(lhs, TINY)
    return lhs, rhs, rel_error


def change_of_aperture_ratio(G: HalfSpaceFn, r: float, w: Weight) -> float:
    """
    ||A_r^2 G||_{L^1(w)} / ||A_r G||_{L^1(w)}, at least 1 since cones nest.

    Raises:
        DegenerateInputError: If ||A_r G||_{L^1(w)} vanishes
    """
    denominator = tent_norm(G, r, 1.0, w, beta=1.0)
    if denominator == 0.0:
        raise DegenerateInputError("Aperture ratio of a function with vanishing tent norm")
    return tent_norm(G, r, 1.0, w, beta=2.0) / denominator
