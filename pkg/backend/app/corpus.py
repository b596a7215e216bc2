"""
Seeded test-function corpus.

Shapes are defined in continuum coordinates, so the same shape can be
sampled on every step of a resolution ladder and measured constants at N
and 2N refer to the same function.
"""
import math
from typing import List, Literal, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .grid import Box, GridFn, HalfSpaceFn, TLevels
from .schemas import ResolutionStep
from .utils import make_rng


class Domain(BaseModel):
    """Continuum window shared by all ladder steps: the box [-L, L]^n and heights [t_min, t_max]."""
    model_config = ConfigDict(frozen=True)

    dim: Literal[1, 2]
    half_width: float = Field(..., gt=0)
    t_min: float = Field(..., gt=0)
    t_max: float = Field(..., gt=0)

    @classmethod
    def default(cls, dim: int) -> "Domain":
        if dim == 1:
            return cls(dim=1, half_width=4.0, t_min=0.125, t_max=2.0)
        return cls(dim=2, half_width=2.0, t_min=0.25, t_max=1.0)

    def box(self, cells: int) -> Box:
        return Box(dim=self.dim, half_width=self.half_width, cells_per_axis=cells)

    def tlevels(self, levels: int) -> TLevels:
        return TLevels(t_min=self.t_min, t_max=self.t_max, count=levels)

    def grids(self, step: ResolutionStep) -> Tuple[Box, TLevels]:
        return self.box(step.cells), self.tlevels(step.levels)


class Piece(BaseModel):
    """Indicator of the ball B(center, radius) or a Gaussian bump of that width, times height."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["ball", "bump"]
    center: Tuple[float, ...]
    radius: float = Field(..., gt=0)
    height: float = 1.0

    def sample(self, box: Box) -> np.ndarray:
        coords = box.coordinates()
        distance2 = sum((c - x0) ** 2 for c, x0 in zip(coords, self.center))
        if self.kind == "ball":
            return self.height * (distance2 < self.radius ** 2)
        return self.height * np.exp(-distance2 / self.radius ** 2)


class Shape(BaseModel):
    """A finite sum of pieces on the base space."""
    model_config = ConfigDict(frozen=True)

    pieces: Tuple[Piece, ...]
    label: str = "shape"

    def sample(self, box: Box) -> GridFn:
        values = np.zeros(box.shape)
        for piece in self.pieces:
            values = values + piece.sample(box)
        return GridFn(box=box, values=values)


class Layer(BaseModel):
    """A base shape placed on the heights t_lo <= t < t_hi."""
    model_config = ConfigDict(frozen=True)

    shape: Shape
    t_lo: float = Field(..., ge=0)
    t_hi: float = Field(..., gt=0)


class HalfSpaceShape(BaseModel):
    """Sum of layers; a level t_k picks up every layer whose window contains it."""
    model_config = ConfigDict(frozen=True)

    layers: Tuple[Layer, ...]
    label: str = "halfspace"

    def sample(self, box: Box, tlevels: TLevels) -> HalfSpaceFn:
        sampled = [(layer, layer.shape.sample(box).values) for layer in self.layers]
        slices = []
        for t in tlevels.levels:
            values = np.zeros(box.shape)
            for layer, base in sampled:
                if layer.t_lo <= t < layer.t_hi:
                    values = values + base
            slices.append(values)
        return HalfSpaceFn.from_slices(box, tlevels, slices)


def full_box(domain: Domain) -> Shape:
    """Indicator of the whole box."""
    reach = domain.half_width * math.sqrt(domain.dim) * 2.0
    centre = (0.0,) * domain.dim
    return Shape(pieces=(Piece(kind="ball", center=centre, radius=reach),), label="box")


def t_slab(domain: Domain, t_lo: float, t_hi: float) -> HalfSpaceShape:
    """F = 1 for t_lo <= t < t_hi on the whole box."""
    return HalfSpaceShape(layers=(Layer(shape=full_box(domain), t_lo=t_lo, t_hi=t_hi),), label=f"slab[{t_lo:g},{t_hi:g})")


def carleson_box(center: Sequence[float], radius: float, separation: float = 0.25) -> HalfSpaceShape:
    """Indicator of B(center, radius) x [separation * radius, radius), kept away from t = 0."""
    piece = Piece(kind="ball", center=tuple(float(c) for c in center), radius=radius)
    layer = Layer(shape=Shape(pieces=(piece,)), t_lo=separation * radius, t_hi=radius)
    return HalfSpaceShape(layers=(layer,), label=f"carleson(r={radius:g})")


def _random_piece(rng: np.random.Generator, domain: Domain, kinds: Sequence[str]) -> Piece:
    span = 0.6 * domain.half_width
    centre = tuple(float(c) for c in rng.uniform(-span, span, size=domain.dim))
    radius = float(rng.uniform(0.1, 0.4) * domain.half_width)
    kind = kinds[int(rng.integers(len(kinds)))]
    height = float(rng.uniform(0.5, 2.0))
    return Piece(kind=kind, center=centre, radius=radius, height=height)


def random_shapes(seed: int, domain: Domain, count: int, kinds: Sequence[str] = ("ball", "bump"), stream: int = 0) -> List[Shape]:
    """
    Seeded unions of one to three pieces.

    Args:
        seed: Global seed
        domain: Continuum window
        count: Number of shapes
        kinds: Piece kinds to draw from
        stream: Sub-stream index, so different checks draw independent shapes
    """
    rng = make_rng(seed, 1, domain.dim, stream)
    shapes = []
    for index in range(count):
        pieces = tuple(_random_piece(rng, domain, kinds) for _ in range(int(rng.integers(1, 4))))
        shapes.append(Shape(pieces=pieces, label=f"random#{index}"))
    return shapes


def random_halfspace_shapes(seed: int, domain: Domain, count: int, stream: int = 0) -> List[HalfSpaceShape]:
    """
    Seeded half-space functions: random layers, t-slabs and Carleson boxes.

    Every layer starts at a positive height, which keeps cone integrals of
    box indicators finite.
    """
    rng = make_rng(seed, 2, domain.dim, stream)
    log_lo, log_hi = math.log(domain.t_min), math.log(domain.t_max)
    shapes = []
    for index in range(count):
        flavour = index % 3
        if flavour == 2:
            span = 0.5 * domain.half_width
            centre = rng.uniform(-span, span, size=domain.dim)
            radius = float(math.exp(rng.uniform(0.5 * (log_lo + log_hi), log_hi)))
            shapes.append(carleson_box(centre, radius).model_copy(update={"label": f"carleson#{index}"}))
            continue
        layers = []
        for _ in range(int(rng.integers(1, 4))):
            lo, hi = sorted(math.exp(v) for v in rng.uniform(log_lo, log_hi, size=2))
            if hi / lo < 2.0:
                hi = lo * 2.0
            pieces = tuple(_random_piece(rng, domain, ("ball", "bump")) for _ in range(int(rng.integers(1, 3))))
            base = Shape(pieces=pieces) if flavour == 0 else full_box(domain)
            layers.append(Layer(shape=base, t_lo=lo, t_hi=hi))
        shapes.append(HalfSpaceShape(layers=tuple(layers), label=f"layers#{index}"))
    return shapes


def random_positive_values(rng: np.random.Generator, shape: Tuple[int, ...], low: float = 0.5, high: float = 2.0) -> np.ndarray:
    """Uniform samples in [low, high), used for random weights and half-space data."""
    return rng.uniform(low, high, size=shape)
