"""
Suite-runnable checks: parameter models and the builders that turn
validated parameters into concrete inputs for the checks in `verify`.
"""
import logging
import math
from fractions import Fraction
from typing import Annotated, Any, Callable, Dict, List, Literal, Optional, Tuple, Type

from pydantic import AfterValidator, BaseModel, BeforeValidator, ConfigDict, Field, field_validator

from .config import parse_ladder
from .corpus import Domain, full_box, random_halfspace_shapes, random_positive_values, random_shapes
from .grid import Box, GridFn, HalfSpaceFn, TLevels
from .operators import OffDiagGeometry, OperatorFamily, extend_slicewise
from .schemas import CheckReport, ResolutionStep
from .utils import make_rng
from .verify import (
    check_apq_equivalence,
    check_averaged_weight_class,
    check_coifman_fefferman_tent,
    check_extrapolation_i,
    check_fractional,
    check_fubini,
    check_lemma_aver,
    check_local_maximal,
    check_maximal_tent_strong,
    check_maximal_tent_weak,
    check_offdiag_annular,
    check_offdiag_proposition,
    check_rdf_properties,
    check_weight_constant,
    check_weight_doubling,
    combine_reports,
    over_ladder,
    require_tightening,
)
from .weights import check_descriptor, make_weight, sampled_weight

logger = logging.getLogger(__name__)


def _exponent(value: Any) -> Any:
    """Accept numbers, "a/b" fractions and "inf"."""
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "infinity", "∞"):
            return math.inf
        try:
            return float(Fraction(text))
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"'{value}' is not a number, a fraction or inf")
    return value


Exponent = Annotated[float, BeforeValidator(_exponent)]
Descriptor = Annotated[str, AfterValidator(check_descriptor)]


class CheckArgs(BaseModel):
    """Parameters shared by every check."""
    model_config = ConfigDict(extra="forbid")

    dim: Literal[1, 2] = Field(1, description="Dimension n")
    seed: Optional[int] = Field(None, description="Overrides the global seed")
    ladder: Optional[List[ResolutionStep]] = Field(None, description="Overrides the global ladder, e.g. 64x8,128x16")
    count: int = Field(8, ge=1, description="Number of corpus functions")

    @field_validator("ladder", mode="before")
    @classmethod
    def _parse_ladder(cls, value):
        if isinstance(value, str):
            return [{"cells": cells, "levels": levels} for cells, levels in parse_ladder(value)]
        return value


class RunContext(BaseModel):
    """Global settings a builder needs besides its own parameters."""
    seed: int
    ladder_1d: List[ResolutionStep]
    ladder_2d: List[ResolutionStep]
    stream: int = Field(0, description="Position of the invocation in the suite")

    def seed_for(self, args: CheckArgs) -> int:
        return self.seed if args.seed is None else args.seed

    def ladder_for(self, args: CheckArgs) -> List[ResolutionStep]:
        if args.ladder is not None:
            return args.ladder
        return self.ladder_1d if args.dim == 1 else self.ladder_2d

    def coarsest(self, args: CheckArgs) -> Tuple[Domain, Box, TLevels]:
        domain = Domain.default(args.dim)
        box, tlevels = domain.grids(self.ladder_for(args)[0])
        return domain, box, tlevels


Builder = Callable[[Any, RunContext], CheckReport]
REGISTRY: Dict[str, Tuple[Type[CheckArgs], Builder]] = {}


def register(name: str, args_model: Type[CheckArgs]):
    """Decorator adding a builder to the registry under `name`."""
    def wrap(builder: Builder) -> Builder:
        REGISTRY[name] = (args_model, builder)
        return builder
    return wrap


def _halfspace_corpus(ctx: RunContext, args: CheckArgs, domain: Domain, box: Box, tlevels: TLevels) -> List[HalfSpaceFn]:
    shapes = random_halfspace_shapes(ctx.seed_for(args), domain, args.count, stream=ctx.stream)
    return [shape.sample(box, tlevels) for shape in shapes]


class LemmaAverArgs(CheckArgs):
    samples: int = Field(1000, ge=1)


@register("lemma_aver", LemmaAverArgs)
def build_lemma_aver(args: LemmaAverArgs, ctx: RunContext) -> CheckReport:
    domain = Domain.default(args.dim)
    seed = ctx.seed_for(args)
    rng = make_rng(seed, 10, args.dim, ctx.stream)
    menu = [domain.half_width * k / 16.0 for k in range(1, 7)]
    span = 0.2 * domain.half_width
    points = rng.uniform(-span, span, size=(args.samples, args.dim))
    radii = rng.integers(len(menu), size=(args.samples, 2))
    shape = random_shapes(seed, domain, 1, stream=ctx.stream)[0]

    def run(box: Box, tlevels: TLevels) -> CheckReport:
        samples = [(box.cell_index(x), menu[i], menu[j]) for x, (i, j) in zip(points, radii)]
        return check_lemma_aver(shape.sample(box), samples)

    return require_tightening(over_ladder("lemma_aver", domain, ctx.ladder_for(args), run), "max_ratio")


class AveragedWeightArgs(CheckArgs):
    weights: List[Descriptor] = Field(["const:1", "step:1:4", "power:0.5", "power:-0.25"])
    ps: List[Exponent] = Field([1.5, 2.0, 3.0])
    ts: List[float] = Field([0.25, 0.5, 1.0])


@register("averaged_weight_class", AveragedWeightArgs)
def build_averaged_weight_class(args: AveragedWeightArgs, ctx: RunContext) -> CheckReport:
    domain = Domain.default(args.dim)

    def run(box: Box, tlevels: TLevels) -> CheckReport:
        parts = []
        for descriptor in args.weights:
            w = make_weight(descriptor, box)
            for p in args.ps:
                parts.append((f"{descriptor},p={p:g}", check_averaged_weight_class(w, p, args.ts)))
        return combine_reports("averaged_weight_class", parts)

    return over_ladder("averaged_weight_class", domain, ctx.ladder_for(args), run)


class FubiniArgs(CheckArgs):
    dims: List[Literal[1, 2]] = Field([1, 2])
    rs: List[Exponent] = Field([1.5, 2.0, 3.0])
    instances: int = Field(50, ge=1)


@register("fubini", FubiniArgs)
def build_fubini(args: FubiniArgs, ctx: RunContext) -> CheckReport:
    rng = make_rng(ctx.seed_for(args), 20, ctx.stream)
    instances = []
    for index in range(args.instances):
        dim = args.dims[index % len(args.dims)]
        domain = Domain.default(dim)
        step = (ctx.ladder_1d if dim == 1 else ctx.ladder_2d)[0] if args.ladder is None else args.ladder[0]
        box, tlevels = domain.grids(step)
        values = random_positive_values(rng, (tlevels.count,) + box.shape) * (rng.random((tlevels.count,) + box.shape) < 0.5)
        F = HalfSpaceFn(box=box, tlevels=tlevels, values=values)
        w = sampled_weight(GridFn(box=box, values=random_positive_values(rng, box.shape, 0.1, 10.0)), "random")
        instances.append((F, args.rs[index % len(args.rs)], w))
    return check_fubini(instances)


class MaximalStrongArgs(CheckArgs):
    ps: List[Exponent] = Field([1.5, 2.0, 3.0])
    rs: List[Exponent] = Field([1.5, 2.0, 3.0])
    weights: List[Descriptor] = Field(["const:1", "power:0.5", "step:1:4"])


@register("maximal_tent_strong", MaximalStrongArgs)
def build_maximal_tent_strong(args: MaximalStrongArgs, ctx: RunContext) -> CheckReport:
    domain = Domain.default(args.dim)
    fam = OperatorFamily.constant("maximal")

    def run(box: Box, tlevels: TLevels) -> CheckReport:
        Gs = _halfspace_corpus(ctx, args, domain, box, tlevels)
        images = [extend_slicewise(fam, G) for G in Gs]
        parts = []
        for descriptor in args.weights:
            w = make_weight(descriptor, box)
            for p in args.ps:
                for r in args.rs:
                    parts.append((f"{descriptor},p={p:g},r={r:g}", check_maximal_tent_strong(Gs, p, r, w, images=images)))
        return combine_reports("maximal_tent_strong", parts)

    return over_ladder("maximal_tent_strong", domain, ctx.ladder_for(args), run)


class MaximalWeakArgs(CheckArgs):
    rs: List[Exponent] = Field([1.5, 2.0, 3.0])
    weights: List[Descriptor] = Field(["const:1", "power:-0.5"])


@register("maximal_tent_weak", MaximalWeakArgs)
def build_maximal_tent_weak(args: MaximalWeakArgs, ctx: RunContext) -> CheckReport:
    domain = Domain.default(args.dim)
    fam = OperatorFamily.constant("maximal")

    def run(box: Box, tlevels: TLevels) -> CheckReport:
        Gs = _halfspace_corpus(ctx, args, domain, box, tlevels)
        images = [extend_slicewise(fam, G) for G in Gs]
        parts = []
        for descriptor in args.weights:
            w = make_weight(descriptor, box)
            for r in args.rs:
                parts.append((f"{descriptor},r={r:g}", check_maximal_tent_weak(Gs, r, w, images=images)))
        return combine_reports("maximal_tent_weak", parts)

    return over_ladder("maximal_tent_weak", domain, ctx.ladder_for(args), run)


def _family(name: str, alpha: Optional[float] = None) -> OperatorFamily:
    if name in ("averaging", "heat", "identity"):
        return OperatorFamily(tag=name)
    return OperatorFamily.constant(name, alpha=alpha)


class ExtrapolationArgs(CheckArgs):
    family: Literal["maximal", "hilbert", "identity"] = "maximal"
    p0: Exponent = 2.0
    w0s: List[Descriptor] = Field(["const:1", "power:0.5"])
    ps: List[Exponent] = Field([2.0])
    rs: List[Exponent] = Field([2.0])
    weights: List[Descriptor] = Field(["power:0", "power:0.125", "power:0.25", "power:0.375"])


@register("extrapolation_i", ExtrapolationArgs)
def build_extrapolation_i(args: ExtrapolationArgs, ctx: RunContext) -> CheckReport:
    domain = Domain.default(args.dim)
    fam = _family(args.family)

    def run(box: Box, tlevels: TLevels) -> CheckReport:
        Gs = _halfspace_corpus(ctx, args, domain, box, tlevels)
        w0s = [make_weight(d, box) for d in args.w0s]
        targets = [(p, r, make_weight(d, box)) for p in args.ps for r in args.rs for d in args.weights]
        return check_extrapolation_i(fam, args.p0, w0s, targets, Gs)

    return over_ladder("extrapolation_i", domain, ctx.ladder_for(args), run)


class CoifmanFeffermanArgs(CheckArgs):
    ps: List[Exponent] = Field([0.5, 1.0, 2.0])
    r: Exponent = 2.0
    ss: List[Exponent] = Field([0.5, 1.0, math.inf])
    weights: List[Descriptor] = Field(["const:1", "power:0.5"], min_length=1)


@register("coifman_fefferman_tent", CoifmanFeffermanArgs)
def build_coifman_fefferman_tent(args: CoifmanFeffermanArgs, ctx: RunContext) -> CheckReport:
    domain = Domain.default(args.dim)

    def run(box: Box, tlevels: TLevels) -> CheckReport:
        Fs = _halfspace_corpus(ctx, args, domain, box, tlevels)
        parts = [
            (descriptor, check_coifman_fefferman_tent(Fs, args.ps, args.r, args.ss, make_weight(descriptor, box)))
            for descriptor in args.weights
        ]
        return combine_reports("coifman_fefferman_tent", parts)

    return over_ladder("coifman_fefferman_tent", domain, ctx.ladder_for(args), run)


class FractionalArgs(CheckArgs):
    alpha: Exponent = 0.5
    pairs: List[Tuple[Exponent, Exponent]] = Field([(4.0 / 3.0, 4.0)])
    r: Exponent = 1.5
    weights: List[Descriptor] = Field(["power:0", "power:0.125", "power:0.25", "power:0.375"])
    control_ps: List[Exponent] = Field([0.5, 1.0, 2.0])
    control_weights: Optional[List[Descriptor]] = None


@register("fractional", FractionalArgs)
def build_fractional(args: FractionalArgs, ctx: RunContext) -> CheckReport:
    domain = Domain.default(args.dim)
    seed = ctx.seed_for(args)
    shapes = random_shapes(seed, domain, args.count, stream=ctx.stream)

    def run(box: Box, tlevels: TLevels) -> CheckReport:
        fs = [shape.sample(box) for shape in shapes]
        Fs = _halfspace_corpus(ctx, args, domain, box, tlevels)
        ws = [make_weight(d, box) for d in args.weights]
        control = None if args.control_weights is None else [make_weight(d, box) for d in args.control_weights]
        return check_fractional(args.alpha, args.pairs, args.r, ws, fs, Fs, args.control_ps, control)

    return over_ladder("fractional", domain, ctx.ladder_for(args), run)


class OffDiagArgs(CheckArgs):
    family: Literal["averaging", "heat", "identity"] = "averaging"
    r: Exponent = 2.0
    M: Optional[Exponent] = Field(None, description="Claimed decay order, the dimension n by default")
    ps: List[Exponent] = Field([2.0, 1.5])
    weights: List[Descriptor] = Field(["const:1", "power:0.25"])
    ts: List[float] = Field([0.25, 0.5])
    gaps: List[float] = Field([0.5, 1.0, 2.0, 4.0, 8.0], description="Separations d/t of the strips")


@register("offdiag_proposition", OffDiagArgs)
def build_offdiag_proposition(args: OffDiagArgs, ctx: RunContext) -> CheckReport:
    domain = Domain.default(args.dim)
    fam = _family(args.family)
    bumps = random_shapes(ctx.seed_for(args), domain, args.count, kinds=("bump",), stream=ctx.stream)
    m_claim = float(args.dim) if args.M is None else args.M

    def run(box: Box, tlevels: TLevels) -> CheckReport:
        probes = [full_box(domain).sample(box)] + [shape.sample(box) for shape in bumps]
        geometry = [
            OffDiagGeometry(gap_cells=int(round(gap * t / box.h)), t=t)
            for t in args.ts
            for gap in args.gaps
            if int(round(gap * t / box.h)) <= box.cells_per_axis - 2
        ]
        Fs = _halfspace_corpus(ctx, args, domain, box, tlevels)
        targets = [(p, make_weight(d, box)) for p in args.ps for d in args.weights]
        return check_offdiag_proposition(fam, args.r, m_claim, targets, probes, geometry, Fs)

    return over_ladder("offdiag_proposition", domain, ctx.ladder_for(args), run)


class RdfArgs(CheckArgs):
    instances: int = Field(20, ge=1)
    depth: int = Field(14, ge=1)
    ps: List[Exponent] = Field([2.0, 1.5, 3.0])
    weights: List[Descriptor] = Field(["const:1", "power:0.5", "power:-0.25"])


@register("rdf_properties", RdfArgs)
def build_rdf_properties(args: RdfArgs, ctx: RunContext) -> CheckReport:
    domain, box, _ = ctx.coarsest(args)
    shapes = random_shapes(ctx.seed_for(args), domain, args.instances, stream=ctx.stream)
    parts = []
    for index, shape in enumerate(shapes):
        p = args.ps[index % len(args.ps)]
        descriptor = args.weights[index % len(args.weights)]
        report = check_rdf_properties(shape.sample(box), make_weight(descriptor, box), p, args.depth)
        parts.append((f"#{index},{descriptor},p={p:g}", report))
    return combine_reports("rdf_properties", parts)


class DoublingArgs(CheckArgs):
    weights: List[Descriptor] = Field(["const:1", "step:1:4", "power:0.5", "power:-0.25"])
    p: Exponent = 2.0
    lams: List[float] = Field([2.0, 3.0])
    ts: List[float] = Field([0.25, 0.5])


@register("weight_doubling", DoublingArgs)
def build_weight_doubling(args: DoublingArgs, ctx: RunContext) -> CheckReport:
    _, box, _ = ctx.coarsest(args)
    parts = [(d, check_weight_doubling(make_weight(d, box), args.p, args.lams, args.ts)) for d in args.weights]
    return combine_reports("weight_doubling", parts)


class ApqArgs(CheckArgs):
    weights: List[Descriptor] = Field(["power:0.125", "step:1:4"])
    p: Exponent = 4.0 / 3.0
    q: Exponent = 4.0


@register("apq_equivalence", ApqArgs)
def build_apq_equivalence(args: ApqArgs, ctx: RunContext) -> CheckReport:
    _, box, _ = ctx.coarsest(args)
    parts = [(d, check_apq_equivalence(make_weight(d, box), args.p, args.q)) for d in args.weights]
    return combine_reports("apq_equivalence", parts)


class AnnularArgs(CheckArgs):
    family: Literal["averaging", "heat"] = "heat"
    r: Exponent = 2.0
    M: Exponent = 2.0
    t: float = 0.25


@register("offdiag_annular", AnnularArgs)
def build_offdiag_annular(args: AnnularArgs, ctx: RunContext) -> CheckReport:
    domain = Domain.default(args.dim)
    shapes = random_shapes(ctx.seed_for(args), domain, args.count, stream=ctx.stream)

    def run(box: Box, tlevels: TLevels) -> CheckReport:
        return check_offdiag_annular(_family(args.family), args.r, args.M, args.t, [s.sample(box) for s in shapes])

    return over_ladder("offdiag_annular", domain, ctx.ladder_for(args), run)


class LocalMaximalArgs(CheckArgs):
    r: Exponent = 2.0
    ts: List[float] = Field([0.25, 0.5])


@register("local_maximal", LocalMaximalArgs)
def build_local_maximal(args: LocalMaximalArgs, ctx: RunContext) -> CheckReport:
    domain = Domain.default(args.dim)
    shapes = random_shapes(ctx.seed_for(args), domain, args.count, stream=ctx.stream)

    def run(box: Box, tlevels: TLevels) -> CheckReport:
        return check_local_maximal([s.sample(box) for s in shapes], args.r, args.ts)

    return over_ladder("local_maximal", domain, ctx.ladder_for(args), run)


class WeightConstantArgs(CheckArgs):
    weight: Descriptor = "power:0.5"
    weight_class: Literal["A_p", "A_inf", "RH_s", "A_pq"] = Field("A_p", alias="class")
    exponent: Optional[Exponent] = 2.0
    q: Optional[Exponent] = None
    doublings: int = Field(2, ge=2)


@register("weight_constant", WeightConstantArgs)
def build_weight_constant(args: WeightConstantArgs, ctx: RunContext) -> CheckReport:
    _, box, _ = ctx.coarsest(args)
    return check_weight_constant(args.weight, box, args.weight_class, args.exponent, args.q, args.doublings)


def validate_args(name: str, params: Dict[str, Any]) -> CheckArgs:
    """Validate raw parameters against the model registered for `name`."""
    args_model, _ = REGISTRY[name]
    return args_model.model_validate(params)


def run_check(name: str, args: CheckArgs, ctx: RunContext) -> CheckReport:
    """Build the inputs of a registered check and run it."""
    _, builder = REGISTRY[name]
    report = builder(args, ctx)
    return report.model_copy(update={"params": report.params.model_copy(update={"seed": ctx.seed_for(args)})})
