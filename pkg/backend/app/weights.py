"""
Weights, Muckenhoupt / reverse Hölder / fractional class constants over
explicit ball families, averaged weights W_t and the Rubio de Francia
iteration.

Every constant is a maximum over a finite BallFamily, hence a lower bound for
the continuum supremum; reports always carry the family descriptor.
"""
import logging
import math
from typing import Callable, Iterable, Iterator, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from .config import config
from .errors import ParameterError, require
from .grid import ARRAY_MODEL, Box, GridFn, _frozen_array, ball_averages, lp_norm
from .schemas import WeightConstants
from .stencil import ball_counts, ball_extreme, ball_sums, unclipped_centres
from .utils import conjugate, parse_descriptor

logger = logging.getLogger(__name__)


class Weight(BaseModel):
    """Strictly positive weight sampled at cell centres."""
    model_config = ARRAY_MODEL

    box: Box
    values: np.ndarray = Field(..., description="Positive cell values")
    kind: Literal["power", "sampled"] = Field("sampled", description="Closed-form power or sampled")
    exponent: Optional[float] = Field(None, description="Exponent a for power weights")
    descriptor: str = Field("sampled", description="Descriptor string, e.g. power:0.5")

    @model_validator(mode="before")
    @classmethod
    def _coerce_values(cls, data):
        if isinstance(data, dict) and "values" in data and "box" in data:
            shape = Box.model_validate(data["box"]).shape
            data = {**data, "values": _frozen_array(data["values"], shape)}
        return data

    @field_validator("values")
    @classmethod
    def _positive(cls, values: np.ndarray) -> np.ndarray:
        if not np.all(np.isfinite(values)) or not np.all(values > 0):
            raise ValueError("Weight values must be finite and strictly positive")
        return values

    def as_gridfn(self) -> GridFn:
        return GridFn(box=self.box, values=self.values)

    def power(self, q: float) -> "Weight":
        """The weight w^q."""
        exponent = None if self.exponent is None else self.exponent * q
        kind = "power" if exponent is not None else "sampled"
        return Weight(
            box=self.box,
            values=self.values ** q,
            kind=kind,
            exponent=exponent,
            descriptor=f"({self.descriptor})^{q:g}",
        )


class BallFamily(BaseModel):
    """Finite family of balls stored as one centre mask per radius."""
    model_config = ARRAY_MODEL

    box: Box
    radii: Tuple[float, ...] = Field(..., description="Distinct radii")
    masks: Tuple[np.ndarray, ...] = Field(..., description="Centre masks, one per radius")
    descriptor: str = Field("custom", description="Human readable family description")

    @model_validator(mode="after")
    def _check(self) -> "BallFamily":
        if len(self.radii) != len(self.masks):
            raise ValueError("BallFamily needs one centre mask per radius")
        if not self.radii or any(r <= 0 for r in self.radii):
            raise ValueError("BallFamily needs at least one radius and all radii positive")
        if not any(np.any(mask) for mask in self.masks):
            raise ValueError("BallFamily must contain at least one ball")
        return self

    @classmethod
    def with_radii(cls, box: Box, radii: Iterable[float], descriptor: str) -> "BallFamily":
        radii = tuple(float(r) for r in radii)
        masks = tuple(np.ones(box.shape, dtype=bool) for _ in radii)
        return cls(box=box, radii=radii, masks=masks, descriptor=descriptor)

    @classmethod
    def dyadic(cls, box: Box) -> "BallFamily":
        """All cells x radii h, 2h, 4h, ..., up to 2L."""
        radii = []
        radius = box.h
        while radius <= 2.0 * box.half_width * (1.0 + 1e-12):
            radii.append(radius)
            radius *= 2.0
        return cls.with_radii(box, radii, "dyadic")

    @classmethod
    def arithmetic(cls, box: Box, max_radius: Optional[float] = None) -> "BallFamily":
        """All cells x radii h, 2h, 3h, ..., up to max_radius (default 2L)."""
        limit = 2.0 * box.half_width if max_radius is None else max_radius
        count = max(1, int(math.floor(limit / box.h + 1e-9)))
        return cls.with_radii(box, [box.h * j for j in range(1, count + 1)], "arithmetic")

    @classmethod
    def from_pairs(cls, box: Box, pairs: Iterable[Tuple[Tuple[int, ...], float]]) -> "BallFamily":
        """Build a family from explicit (centre index, radius) pairs."""
        grouped = {}
        for centre, radius in pairs:
            require(radius > 0, f"Ball radius must be positive, got {radius}")
            mask = grouped.setdefault(float(radius), np.zeros(box.shape, dtype=bool))
            mask[tuple(centre)] = True
        radii = tuple(sorted(grouped))
        return cls(box=box, radii=radii, masks=tuple(grouped[r] for r in radii), descriptor="pairs")

    @classmethod
    def interior(cls, box: Box, radii: Iterable[float], margin: float) -> "BallFamily":
        """Balls B(x, s) whose enlargement B(x, s + margin) lies inside the box."""
        radii = tuple(float(r) for r in radii)
        masks = tuple(unclipped_centres(box.shape, box.stencil(r + margin)) for r in radii)
        keep = [i for i, mask in enumerate(masks) if np.any(mask)]
        require(bool(keep), "No ball of the family fits inside the box with the requested margin")
        return cls(
            box=box,
            radii=tuple(radii[i] for i in keep),
            masks=tuple(masks[i] for i in keep),
            descriptor=f"interior(margin={margin:g})",
        )

    def enlarged(self, margin: float = 0.0, factor: float = 1.0) -> "BallFamily":
        """Same centres with radii r -> factor * r + margin."""
        return BallFamily(
            box=self.box,
            radii=tuple(factor * r + margin for r in self.radii),
            masks=self.masks,
            descriptor=f"{self.descriptor}*{factor:g}+{margin:g}",
        )

    def members(self) -> Iterator[Tuple[Tuple[int, ...], float]]:
        for radius, mask in zip(self.radii, self.masks):
            for centre in zip(*np.nonzero(mask)):
                yield tuple(int(c) for c in centre), radius

    def size(self) -> int:
        return int(sum(np.count_nonzero(mask) for mask in self.masks))


def power_weight(a: float, box: Box) -> Weight:
    """
    Closed-form power weight w(x) = max(|x|, h/2)^a.

    Args:
        a: Exponent
        box: Grid the weight is sampled on

    Returns:
        Weight of kind "power"
    """
    values = np.maximum(box.radius(), box.h / 2.0) ** a
    return Weight(box=box, values=values, kind="power", exponent=float(a), descriptor=f"power:{a:g}")


def step_weight(left: float, right: float, box: Box) -> Weight:
    """Weight equal to `left` where x_1 < 0 and `right` where x_1 >= 0."""
    require(left > 0 and right > 0, "Step weight values must be positive")
    first = box.coordinates()[0]
    values = np.where(first < 0.0, float(left), float(right))
    return Weight(box=box, values=values, descriptor=f"step:{left:g}:{right:g}")


def constant_weight(value: float, box: Box) -> Weight:
    require(value > 0, "Constant weight must be positive")
    exponent = 0.0 if value == 1.0 else None
    return Weight(
        box=box,
        values=np.full(box.shape, float(value)),
        kind="power" if exponent is not None else "sampled",
        exponent=exponent,
        descriptor=f"const:{value:g}",
    )


def sampled_weight(f: GridFn, descriptor: str = "sampled") -> Weight:
    return Weight(box=f.box, values=f.values, descriptor=descriptor)


WEIGHT_ARITY = {"const": 1, "step": 2, "power": 1}


def check_descriptor(descriptor: str) -> str:
    """
    Validate a weight descriptor without building the weight.

    Raises:
        ParameterError: For unknown kinds, wrong argument counts or non-positive values
    """
    kind, args = parse_descriptor(descriptor)
    if WEIGHT_ARITY.get(kind) != len(args):
        raise ParameterError(f"Unknown weight descriptor '{descriptor}'")
    if kind in ("const", "step") and min(args) <= 0:
        raise ParameterError(f"Weight descriptor '{descriptor}' needs positive values")
    return descriptor


def make_weight(descriptor: str, box: Box) -> Weight:
    """
    Build a weight from a descriptor string.

    Args:
        descriptor: "const:c", "step:a:b" or "power:a"
        box: Grid

    Raises:
        ParameterError: For unknown kinds or wrong argument counts
    """
    kind, args = parse_descriptor(check_descriptor(descriptor))
    if kind == "const":
        return constant_weight(args[0], box)
    if kind == "step":
        return step_weight(args[0], args[1], box)
    return power_weight(args[0], box)


def _ball_means(values: np.ndarray, box: Box, radius: float) -> np.ndarray:
    stencil = box.stencil(radius)
    return ball_sums(values, stencil) / ball_counts(box.shape, stencil)


def _family_max(
    w: Weight,
    family: BallFamily,
    per_ball: Callable[[float], np.ndarray],
) -> Tuple[float, Optional[Tuple[int, ...]], Optional[float]]:
    """Maximum of per_ball(radius)[centre] over the family, with its witness ball."""
    require(family.box == w.box, "Weight and ball family live on different boxes")
    best, witness, witness_radius = -math.inf, None, None
    for radius, mask in zip(family.radii, family.masks):
        if not np.any(mask):
            continue
        products = np.where(mask, per_ball(radius), -np.inf)
        index = int(np.argmax(products))
        if products.flat[index] > best:
            best = float(products.flat[index])
            witness = tuple(int(i) for i in np.unravel_index(index, products.shape))
            witness_radius = radius
    return best, witness, witness_radius


def _constants(value, klass, params, family, witness, witness_radius) -> WeightConstants:
    return WeightConstants(
        value=value,
        weight_class=klass,
        params=params,
        family=family.descriptor,
        family_size=family.size(),
        witness_center=list(witness) if witness is not None else None,
        witness_radius=witness_radius,
    )


def ap_constant(w: Weight, p: float, family: BallFamily) -> WeightConstants:
    """
    Family-relative A_p constant.

    For p > 1 the defining product is (avg_B w)(avg_B w^{1-p'})^{p-1}; for
    p = 1 it is (avg_B w) * max_B (1/w).

    Args:
        w: Weight
        p: Exponent >= 1
        family: Balls the supremum runs over

    Raises:
        ParameterError: If p < 1
    """
    require(p >= 1, f"A_p needs p >= 1, got {p}")
    box = w.box
    if p == 1:
        def per_ball(radius):
            return _ball_means(w.values, box, radius) / ball_extreme(w.values, box.stencil(radius), "min")
    else:
        dual = w.values ** (1.0 - conjugate(p))

        def per_ball(radius):
            return _ball_means(w.values, box, radius) * _ball_means(dual, box, radius) ** (p - 1.0)

    value, witness, radius = _family_max(w, family, per_ball)
    return _constants(value, "A_1" if p == 1 else "A_p", {"p": p}, family, witness, radius)


def ainfty_constant(w: Weight, family: BallFamily, p_grid: Sequence[float]) -> WeightConstants:
    """
    A_infinity constant as the minimum of A_p constants over a grid of exponents.

    Raises:
        ParameterError: If p_grid is empty or has an exponent below 1
    """
    require(len(p_grid) > 0, "A_infinity estimate needs a non-empty exponent grid")
    require(all(p >= 1 for p in p_grid), "All exponents of the grid must be >= 1")
    estimates = [ap_constant(w, p, family) for p in p_grid]
    best = min(estimates, key=lambda c: c.value)
    return best.model_copy(update={"weight_class": "A_inf", "params": {"p": best.params["p"], "grid_size": float(len(p_grid))}})


def rh_constant(w: Weight, s: float, family: BallFamily) -> WeightConstants:
    """
    Reverse Hölder constant (avg_B w^s)^{1/s} / avg_B w, or max_B w / avg_B w for s = inf.

    Raises:
        ParameterError: If s <= 1
    """
    require(s > 1, f"RH_s needs s > 1, got {s}")
    box = w.box
    if math.isinf(s):
        def per_ball(radius):
            return ball_extreme(w.values, box.stencil(radius), "max") / _ball_means(w.values, box, radius)
    else:
        powered = w.values ** s

        def per_ball(radius):
            return _ball_means(powered, box, radius) ** (1.0 / s) / _ball_means(w.values, box, radius)

    value, witness, radius = _family_max(w, family, per_ball)
    return _constants(value, "RH_inf" if math.isinf(s) else "RH_s", {"s": s}, family, witness, radius)


def apq_constant(w: Weight, p: float, q: float, family: BallFamily) -> WeightConstants:
    """
    A_{p,q} constant (avg_B w^q)(avg_B w^{-p'})^{q/p'} for finite p > 1.

    Raises:
        ParameterError: If p <= 1, p infinite, or q < 1
    """
    require(p > 1 and math.isfinite(p), f"A_{{p,q}} needs finite p > 1, got {p}")
    require(q >= 1, f"A_{{p,q}} needs q >= 1, got {q}")
    box = w.box
    dual_exp = conjugate(p)
    powered = w.values ** q
    dual = w.values ** (-dual_exp)

    def per_ball(radius):
        return _ball_means(powered, box, radius) * _ball_means(dual, box, radius) ** (q / dual_exp)

    value, witness, radius = _family_max(w, family, per_ball)
    return _constants(value, "A_pq", {"p": p, "q": q}, family, witness, radius)


def averaged_weight(w: Weight, t: float) -> Weight:
    """
    W_t(x) = discrete average of w over B_d(x, t).

    Raises:
        ParameterError: If t <= 0
    """
    require(t > 0, f"Averaging radius must be positive, got {t}")
    averaged = ball_averages(w.as_gridfn(), t)
    return Weight(box=w.box, values=averaged.values, descriptor=f"W_{t:g}[{w.descriptor}]")


def discretization_slack(h: float, s: float, t: float, n: int, power: float = 1.0) -> float:
    """(1 + 2h/min(s, t))^{n * power} - 1, the deviation of discrete ball-measure ratios."""
    return (1.0 + 2.0 * h / min(s, t)) ** (n * power) - 1.0


def detect_divergence(values: Sequence[float], growth: Optional[float] = None) -> bool:
    """
    True when the estimate grows by more than `growth` at each of the last two doublings.

    Args:
        values: Constant estimates at N, 2N, 4N (at least three entries)
        growth: Per-doubling factor, TENTLAB_DIVERGENCE_GROWTH by default
    """
    growth = config.DIVERGENCE_GROWTH if growth is None else growth
    if len(values) < 3:
        return False
    last = values[-3:]
    if any(not math.isfinite(v) for v in last):
        return True
    return all(b > growth * a for a, b in zip(last, last[1:]))


def refined_constant(
    descriptor: str,
    box: Box,
    compute: Callable[[Weight, BallFamily], WeightConstants],
    doublings: int = 2,
    family_factory: Callable[[Box], BallFamily] = BallFamily.dyadic,
) -> WeightConstants:
    """
    Evaluate a weight constant at N, 2N, ..., 2^doublings N and flag divergence.

    Args:
        descriptor: Weight descriptor rebuilt at every resolution
        box: Coarsest grid
        compute: Constant to evaluate, e.g. lambda w, fam: ap_constant(w, 2, fam)
        doublings: Number of N-doublings
        family_factory: Ball family built on every grid

    Returns:
        Constants at the finest resolution with `ladder` and `divergent` filled in
    """
    ladder: List[float] = []
    current = box
    result = None
    for _ in range(doublings + 1):
        result = compute(make_weight(descriptor, current), family_factory(current))
        ladder.append(result.value)
        current = current.refine()
    divergent = detect_divergence(ladder)
    if divergent:
        logger.info(f"✗ {descriptor}: {result.weight_class} estimate diverges under refinement {ladder}")
    return result.model_copy(update={"ladder": ladder, "divergent": divergent})


def doubling_ratio(w: Weight, p: float, family: BallFamily, lam: float) -> Tuple[float, float]:
    """
    Doubling of an A_p weight: w(lam B) <= [w]_{A_p} (|lam B|/|B|)^p w(B).

    The discrete ball measures replace lam^n, which keeps the bound exact on
    the grid (Hölder on the enlarged ball).

    Args:
        w: Weight
        p: A_p exponent >= 1
        family: Balls B; the enlarged balls are taken with the same centres
        lam: Enlargement factor > 1

    Returns:
        (max_B w(lam B)/w(B), max_B of that ratio divided by its bound)
    """
    require(lam > 1, f"Enlargement factor must exceed 1, got {lam}")
    box = w.box
    constant = ap_constant(w, p, family.enlarged(factor=lam)).value
    worst_ratio, worst_relative = 0.0, 0.0
    for radius, mask in zip(family.radii, family.masks):
        if not np.any(mask):
            continue
        small, big = box.stencil(radius), box.stencil(lam * radius)
        ratio = ball_sums(w.values, big) / ball_sums(w.values, small)
        count_ratio = ball_counts(box.shape, big) / ball_counts(box.shape, small)
        bound = constant * count_ratio ** p
        worst_ratio = max(worst_ratio, float(np.max(ratio[mask])))
        worst_relative = max(worst_relative, float(np.max((ratio / bound)[mask])))
    return worst_ratio, worst_relative


def averaged_weight_scaling(w: Weight, p: float, t: float, lam: float) -> Tuple[float, float]:
    """
    Pointwise scaling W_{lam t} <= [w]_{A_p} (|B_{lam t}|/|B_t|)^{p-1} W_t.

    Returns:
        (max_x W_{lam t}(x)/W_t(x), max_x of that ratio divided by its bound)
    """
    require(lam > 1, f"Enlargement factor must exceed 1, got {lam}")
    box = w.box
    big_family = BallFamily.with_radii(box, [lam * t], f"radius {lam * t:g}")
    constant = ap_constant(w, p, big_family).value
    ratio = averaged_weight(w, lam * t).values / averaged_weight(w, t).values
    count_ratio = ball_counts(box.shape, box.stencil(lam * t)) / ball_counts(box.shape, box.stencil(t))
    bound = constant * count_ratio ** (p - 1.0)
    return float(np.max(ratio)), float(np.max(ratio / bound))


class RdfIteration(BaseModel):
    """Output of the Rubio de Francia iteration."""
    model_config = ARRAY_MODEL

    majorant: GridFn = Field(..., description="R h")
    tail: GridFn = Field(..., description="M^{depth+1} h / (2 B)^depth, the truncation remainder")
    tail_bound: float = Field(..., description="2^{-depth} * ||h||_{L^p(w)}")
    norm_bound: float
    depth: int


def rdf_iterate(h: GridFn, w: Weight, p: float, depth: int, norm_bound: float, family: Optional[BallFamily] = None) -> RdfIteration:
    """
    Rubio de Francia iteration R h = sum_{k=0}^{depth} M^k h / (2 B)^k.

    Args:
        h: Non-negative function
        w: Weight the norm bound refers to
        p: Exponent > 1
        depth: Number of terms beyond the identity, >= 1
        norm_bound: B >= operator norm of M on L^p(w)
        family: Ball family of the maximal operator (dyadic by default)

    Raises:
        ParameterError: If depth < 1, norm_bound <= 0, p <= 1 or h is negative somewhere
    """
    from .operators import maximal

    require(depth >= 1, f"Iteration depth must be >= 1, got {depth}")
    require(norm_bound > 0, f"Norm bound must be positive, got {norm_bound}")
    require(p > 1, f"Rubio de Francia iteration needs p > 1, got {p}")
    require(bool(np.all(h.values >= 0)), "Rubio de Francia iteration needs h >= 0")
    family = family or BallFamily.dyadic(h.box)

    scale = 2.0 * norm_bound
    term = h
    total = h.values.copy()
    for k in range(1, depth + 1):
        term = maximal(term, family)
        total += term.values / scale ** k
    tail = maximal(term, family).values / scale ** depth
    return RdfIteration(
        majorant=h.with_values(total),
        tail=h.with_values(tail),
        tail_bound=2.0 ** (-depth) * lp_norm(h, p, w),
        norm_bound=norm_bound,
        depth=depth,
    )
