"""
Numerical checks of the weighted tent-space machinery.

Every check runs at one resolution and returns a CheckReport. Inequalities
with explicit constants are asserted against those constants (plus the
recorded discretisation slack); inequalities with unspecified constants
are reported as measured constants under keys starting with "C:", which
over_ladder then asserts to be finite and stable under refinement.
"""
import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import config
from .corpus import Domain
from .errors import require
from .grid import Box, GridFn, HalfSpaceFn, TLevels, ball_averages, lorentz_quasinorm, lp_norm
from .operators import (
    FIT_FLOOR,
    OffDiagGeometry,
    OperatorFamily,
    extend_slicewise,
    family_apply,
    maximal,
    maximal_opnorm_estimate,
    offdiag_profile,
)
from .schemas import CheckParams, CheckReport, CheckStatus, OffDiagProfile, PsiPoint, ResolutionStep, WeightConstants
from .stencil import unclipped_centres
from .tent import cone_functional, fubini_identity_residual, tent_norm
from .utils import TINY, drift, relative_error
from .weights import (
    BallFamily,
    Weight,
    ainfty_constant,
    ap_constant,
    apq_constant,
    averaged_weight,
    averaged_weight_scaling,
    discretization_slack,
    doubling_ratio,
    rdf_iterate,
    refined_constant,
    rh_constant,
)

logger = logging.getLogger(__name__)

ROUNDING = 1e-12
CONSTANT = "C:"
AINFTY_GRID = (1.5, 2.0, 3.0, 5.0)
NEAR_ENDPOINT = 1.05


def _status(ok: bool) -> CheckStatus:
    return CheckStatus.PASS if ok else CheckStatus.FAIL


def _worst_ratio(
    items: Sequence,
    numerator: Callable,
    denominator: Callable,
    skipped: List[str],
    tag: str,
) -> float:
    """Largest numerator/denominator over items; items with a vanishing denominator are skipped."""
    best = 0.0
    for index, item in enumerate(items):
        bottom = denominator(item)
        if bottom == 0.0:
            skipped.append(f"{tag}#{index}: vanishing denominator")
            continue
        best = max(best, numerator(item) / bottom)
    return best


def _all_finite(measured: Dict[str, float]) -> bool:
    return all(math.isfinite(v) for k, v in measured.items() if k.startswith(CONSTANT))


def _square_function(H: HalfSpaceFn, r: float) -> GridFn:
    """(sum_k delta |H(., t_k)|^r)^{1/r}, the vertical L^r(dt/t) norm without cones."""
    total = H.tlevels.delta * np.sum(np.abs(H.values) ** r, axis=0)
    return GridFn(box=H.box, values=total ** (1.0 / r))


def _slice_map(H: HalfSpaceFn, op: Callable[[float, GridFn], np.ndarray]) -> HalfSpaceFn:
    return HalfSpaceFn.from_slices(H.box, H.tlevels, [op(t, f) for t, f in H.slices()])


def psi_trace(points: Sequence[PsiPoint], tol: Optional[float] = None) -> Tuple[List[PsiPoint], bool]:
    """
    Order (weight constant, measured constant) pairs and test monotone compatibility.

    Sorted by weight constant, no measured constant may drop more than `tol`
    below the running maximum.

    Returns:
        (sorted points, compatible flag)
    """
    tol = config.STABILITY_TOL if tol is None else tol
    ordered = sorted(points, key=lambda pt: (pt.weight_constant, pt.label))
    running = -math.inf
    compatible = True
    for point in ordered:
        if point.measured_constant < (1.0 - tol) * running:
            compatible = False
        running = max(running, point.measured_constant)
    return ordered, compatible


def _grouped_psi(points: Sequence[PsiPoint], group: Callable[[PsiPoint], str]) -> Tuple[List[PsiPoint], List[str]]:
    """psi_trace per group; returns all points (group order) and the incompatible groups."""
    groups: Dict[str, List[PsiPoint]] = {}
    for point in points:
        groups.setdefault(group(point), []).append(point)
    ordered, broken = [], []
    for key in sorted(groups):
        trace, ok = psi_trace(groups[key])
        ordered.extend(trace)
        if not ok:
            broken.append(key)
    return ordered, broken


def over_ladder(
    name: str,
    domain: Domain,
    ladder: Sequence[ResolutionStep],
    run: Callable[[Box, TLevels], CheckReport],
    tol: Optional[float] = None,
) -> CheckReport:
    """
    Run a check at every ladder step and merge the reports.

    The merged report takes its measurements from the finest step, the
    per-step values go to `series`, and every "C:" constant must drift by
    less than `tol` between consecutive steps.
    """
    tol = config.STABILITY_TOL if tol is None else tol
    require(len(ladder) > 0, "Resolution ladder is empty")
    steps = []
    for step in ladder:
        box, tlevels = domain.grids(step)
        logger.debug(f"→ {name} at N={step.cells} K={step.levels}")
        steps.append(run(box, tlevels))
    finest = steps[-1]

    series: Dict[str, List[float]] = {}
    for key in finest.measured:
        if all(key in report.measured for report in steps):
            series[key] = [report.measured[key] for report in steps]
    measured = dict(finest.measured)
    reason = None
    status = CheckStatus.PASS
    for step, report in zip(ladder, steps):
        if report.status != CheckStatus.PASS and status == CheckStatus.PASS:
            status = report.status
            reason = f"N={step.cells}: {report.reason}"
    for key, values in series.items():
        if not key.startswith(CONSTANT):
            continue
        measured[f"drift:{key[len(CONSTANT):]}"] = drift(values)
        if status == CheckStatus.PASS and drift(values) >= tol:
            status = CheckStatus.FAIL
            reason = f"{key[len(CONSTANT):]} drifts by {drift(values):.3g} under refinement"

    notes: List[str] = []
    for report in steps:
        notes.extend(n for n in report.notes if n not in notes)
    skipped = [f"N={s.cells}: {item}" for s, report in zip(ladder, steps) for item in report.skipped]
    params = finest.params.model_copy(update={"N": [s.cells for s in ladder], "K": [s.levels for s in ladder]})
    return finest.model_copy(
        update={
            "name": name,
            "params": params,
            "measured": measured,
            "series": {**series, **finest.series},
            "status": status,
            "reason": reason,
            "notes": notes,
            "skipped": skipped,
        }
    )


def require_tightening(report: CheckReport, key: str) -> CheckReport:
    """
    Require the excess of `key` over the report bound to shrink under refinement.

    The excess of a step is max(0, value / bound - 1). The ladder fails when
    the finest step still exceeds the bound by more than the coarsest one
    did; a finest value at or below the bound always passes.
    """
    values = report.series.get(key)
    if report.bound is None or not values:
        return report
    excess = [max(0.0, value / report.bound - 1.0) for value in values]
    measured = {**report.measured, f"excess:{key}": excess[-1]}
    update = {"measured": measured}
    if report.status == CheckStatus.PASS and excess[-1] > excess[0] * (1.0 + ROUNDING) + TINY:
        update["status"] = CheckStatus.FAIL
        update["reason"] = f"{key} exceeds the bound by {excess[-1]:.3g} at the finest step, {excess[0]:.3g} at the coarsest"
    return report.model_copy(update=update)


def check_lemma_aver(h: GridFn, samples: Sequence[Tuple[Tuple[int, ...], float, float]]) -> CheckReport:
    """
    Averages of averages: avg_{B(x,s)} avg_{B(y,t)} h <= 2^n (1 + 2h/min(s,t))^n avg_{B(x,s+t)} h.

    Samples whose enlarged ball B(x, s+t) leaves the box are skipped.

    Args:
        h: Non-negative function
        samples: (centre cell, s, t) triples
    """
    box = h.box
    n = box.dim
    require(bool(np.all(h.values >= 0)), "Lemma check needs h >= 0")
    inner: Dict[float, GridFn] = {}
    outer: Dict[Tuple[float, float], np.ndarray] = {}
    enlarged: Dict[float, np.ndarray] = {}
    interior: Dict[float, np.ndarray] = {}
    skipped: List[str] = []
    worst_ratio, worst_slack, checked, failures = 0.0, 0.0, 0, 0

    for x, s, t in samples:
        require(s > 0 and t > 0, f"Radii must be positive, got s={s}, t={t}")
        x = tuple(int(i) for i in x)
        if s + t not in interior:
            interior[s + t] = unclipped_centres(box.shape, box.stencil(s + t))
        if not interior[s + t][x]:
            skipped.append(f"x={list(x)} s={s:g} t={t:g}: B(x, s+t) leaves the box")
            continue
        if t not in inner:
            inner[t] = ball_averages(h, t)
        if (s, t) not in outer:
            outer[(s, t)] = ball_averages(inner[t], s).values
        if s + t not in enlarged:
            enlarged[s + t] = ball_averages(h, s + t).values
        lhs, big = float(outer[(s, t)][x]), float(enlarged[s + t][x])
        slack = discretization_slack(box.h, s, t, n)
        checked += 1
        if lhs > 2.0 ** n * (1.0 + slack) * big * (1.0 + ROUNDING) + TINY:
            failures += 1
        if big > 0.0:
            worst_ratio = max(worst_ratio, lhs / big)
        worst_slack = max(worst_slack, slack)

    status = _status(failures == 0)
    return CheckReport(
        name="lemma_aver",
        params=CheckParams(n=n, N=[box.cells_per_axis]),
        measured={"max_ratio": worst_ratio, "samples": float(checked), "failures": float(failures)},
        bound=2.0 ** n,
        slack=worst_slack,
        status=status,
        reason=None if failures == 0 else f"{failures} of {checked} samples exceed 2^n (1 + slack)",
        skipped=skipped,
    )


def check_averaged_weight_class(
    w: Weight,
    p: float,
    t_list: Sequence[float],
    family: Optional[BallFamily] = None,
) -> CheckReport:
    """
    [W_t]_{A_p} <= 2^{np} [w]_{A_p} (1 + slack) on interior families.

    For each t the left side runs over balls B(x, s) with B(x, s+t) in the
    box, the right side over the same centres with radii s+t. The slack is
    (1 + 2h/min(s,t))^{np} - 1 per radius s.

    Args:
        w: Weight
        p: Exponent >= 1
        t_list: Averaging radii
        family: Radii source (dyadic radii of at least 2h by default)
    """
    box = w.box
    n = box.dim
    require(p >= 1, f"A_p needs p >= 1, got {p}")
    radii = family.radii if family is not None else [r for r in BallFamily.dyadic(box).radii if r >= 2.0 * box.h]
    measured: Dict[str, float] = {}
    skipped: List[str] = []
    worst, worst_slack, failures = 0.0, 0.0, 0

    for t in t_list:
        require(t > 0, f"Averaging radius must be positive, got {t}")
        fitting = [s for s in radii if np.any(unclipped_centres(box.shape, box.stencil(s + t)))]
        if not fitting:
            skipped.append(f"t={t:g}: no ball B(x, s+t) fits inside the box")
            continue
        inner = BallFamily.interior(box, fitting, margin=t)
        padded = inner.enlarged(margin=t)
        base_constant = ap_constant(w, p, padded).value
        averaged = averaged_weight(w, t)
        measured[f"A_p[w]@t={t:g}"] = base_constant
        for s, mask in zip(inner.radii, inner.masks):
            single = BallFamily(box=box, radii=(s,), masks=(mask,), descriptor=f"interior s={s:g}")
            value = ap_constant(averaged, p, single).value
            slack = discretization_slack(box.h, s, t, n, power=p)
            relative = value / (2.0 ** (n * p) * base_constant)
            worst, worst_slack = max(worst, relative), max(worst_slack, slack)
            if relative > (1.0 + slack) * (1.0 + ROUNDING):
                failures += 1
        measured[f"A_p[W_t]@t={t:g}"] = ap_constant(averaged, p, inner).value

    measured["max_relative"] = worst
    return CheckReport(
        name="averaged_weight_class",
        params=CheckParams(n=n, N=[box.cells_per_axis], p=p, weight=w.descriptor, family="interior dyadic"),
        measured=measured,
        bound=2.0 ** (n * p),
        slack=worst_slack,
        status=_status(failures == 0),
        reason=None if failures == 0 else f"{failures} (s, t) pairs exceed 2^(np) [w] (1 + slack)",
        skipped=skipped,
    )


def check_fubini(instances: Sequence[Tuple[HalfSpaceFn, float, Weight]], rtol: Optional[float] = None) -> CheckReport:
    """Discrete Fubini identity on every (F, r, w) instance, relative residual <= rtol."""
    rtol = config.IDENTITY_RTOL if rtol is None else rtol
    residuals = [fubini_identity_residual(F, r, w)[2] for F, r, w in instances]
    worst = max(residuals, default=0.0)
    failures = sum(1 for value in residuals if value > rtol)
    dims = sorted({F.box.dim for F, _, _ in instances})
    return CheckReport(
        name="fubini",
        params=CheckParams(n=dims[0] if len(dims) == 1 else None, extra={"instances": len(instances)}),
        measured={"max_rel_error": worst, "instances": float(len(instances))},
        series={"rel_error": residuals},
        bound=rtol,
        status=_status(failures == 0),
        reason=None if failures == 0 else f"{failures} instances exceed the identity tolerance",
    )


def check_maximal_tent_strong(
    Gs: Sequence[HalfSpaceFn],
    p: float,
    r: float,
    w: Weight,
    family: Optional[BallFamily] = None,
    images: Optional[Sequence[HalfSpaceFn]] = None,
) -> CheckReport:
    """
    Strong-type maximal estimate on T_r^p(w): C = max_G ||M G||/||G||.

    `images` may carry the precomputed slice-wise maximal extensions of Gs.

    Raises:
        ParameterError: If p <= 1 or r <= 1
    """
    require(p > 1 and r > 1, f"Strong maximal check needs p, r > 1, got p={p}, r={r}")
    fam = OperatorFamily.constant("maximal", family=family)
    images = images if images is not None else [extend_slicewise(fam, G) for G in Gs]
    skipped: List[str] = []
    constant = _worst_ratio(
        list(zip(Gs, images)),
        lambda pair: tent_norm(pair[1], r, p, w),
        lambda pair: tent_norm(pair[0], r, p, w),
        skipped,
        "G",
    )
    weight_constant = ap_constant(w, p, family or BallFamily.dyadic(w.box)).value
    measured = {f"{CONSTANT}maximal": constant, "A_p": weight_constant}
    return CheckReport(
        name="maximal_tent_strong",
        params=CheckParams(n=w.box.dim, N=[w.box.cells_per_axis], p=p, r=r, weight=w.descriptor, family=fam.name),
        measured=measured,
        status=_status(_all_finite(measured)),
        reason=None if _all_finite(measured) else "non-finite constant",
        skipped=skipped,
        psi_trace=[PsiPoint(label=w.descriptor, weight_constant=weight_constant, measured_constant=constant)],
    )


def check_maximal_tent_weak(
    Gs: Sequence[HalfSpaceFn],
    r: float,
    w: Weight,
    family: Optional[BallFamily] = None,
    images: Optional[Sequence[HalfSpaceFn]] = None,
    p_near: float = NEAR_ENDPOINT,
) -> CheckReport:
    """
    Weak-type endpoint T_r^1(w) -> T_r^{1,inf}(w) of the maximal extension.

    The weak constant must stay below the strong constant at p = 1 (by
    Tchebychev) and below the strong constant at p_near slightly above 1,
    where the strong-type bound still holds. Also recorded: the aperture-2
    term ||A_r^2 G||_{L^1(w)} and the
    Fefferman-Stein term ||(int M(G~)^r dt/t)^{1/r}||_{L^{1,inf}(w)} with
    G~(x,t) the ball average of |G(., t)| over B(x, t), all relative to
    ||G||_{T_r^1(w)}. The Jensen step ||(int G~^r dt/t)^{1/r}||_{L^1(w)} <=
    ||(int avg |G|^r dt/t)^{1/r}||_{L^1(w)} is asserted exactly.
    """
    require(r > 1, f"Weak maximal check needs r > 1, got {r}")
    require(p_near > 1, f"Comparison exponent must exceed 1, got {p_near}")
    fam = OperatorFamily.constant("maximal", family=family)
    skipped: List[str] = []
    images = images if images is not None else [extend_slicewise(fam, G) for G in Gs]
    weak, strong, strong_near, aperture, fefferman_stein = 0.0, 0.0, 0.0, 0.0, 0.0
    jensen_failures = 0

    for index, (G, extended) in enumerate(zip(Gs, images)):
        bottom = tent_norm(G, r, 1.0, w)
        if bottom == 0.0:
            skipped.append(f"G#{index}: vanishing denominator")
            continue
        cone = cone_functional(G, r)
        image = cone_functional(extended, r)
        weak = max(weak, lorentz_quasinorm(image, 1.0, math.inf, w) / bottom)
        strong = max(strong, lp_norm(image, 1.0, w) / bottom)
        strong_near = max(strong_near, lp_norm(image, p_near, w) / lp_norm(cone, p_near, w))
        aperture = max(aperture, tent_norm(G, r, 1.0, w, beta=2.0) / bottom)

        averaged = _slice_map(G, lambda t, g: ball_averages(g.abs(), t).values)
        spread = _slice_map(averaged, lambda t, g: maximal(g, family).values)
        fefferman_stein = max(fefferman_stein, lorentz_quasinorm(_square_function(spread, r), 1.0, math.inf, w) / bottom)

        powered = _slice_map(G, lambda t, g: ball_averages(g.with_values(np.abs(g.values) ** r), t).values ** (1.0 / r))
        jensen_lhs = lp_norm(_square_function(averaged, r), 1.0, w)
        jensen_rhs = lp_norm(_square_function(powered, r), 1.0, w)
        if jensen_lhs > jensen_rhs * (1.0 + ROUNDING) + TINY:
            jensen_failures += 1

    a1 = ap_constant(w, 1.0, family or BallFamily.dyadic(w.box)).value
    measured = {
        f"{CONSTANT}weak": weak,
        "strong_p1": strong,
        f"strong_p{p_near:g}": strong_near,
        "aperture_term": aperture,
        "fefferman_stein_term": fefferman_stein,
        "A_1": a1,
    }
    ok, reason = True, None
    if not _all_finite(measured):
        ok, reason = False, "non-finite constant"
    elif weak > strong * (1.0 + ROUNDING) + TINY:
        ok, reason = False, "weak constant exceeds the strong p = 1 constant"
    elif weak > strong_near * (1.0 + ROUNDING) + TINY:
        ok, reason = False, f"weak constant exceeds the strong p = {p_near:g} constant"
    elif jensen_failures:
        ok, reason = False, f"Jensen step fails on {jensen_failures} instances"
    return CheckReport(
        name="maximal_tent_weak",
        params=CheckParams(n=w.box.dim, N=[w.box.cells_per_axis], p=1.0, r=r, s=math.inf, weight=w.descriptor, family=fam.name),
        measured=measured,
        status=_status(ok),
        reason=reason,
        skipped=skipped,
        psi_trace=[PsiPoint(label=w.descriptor, weight_constant=a1, measured_constant=weak)],
    )


def _weight_constant_with_flag(
    w: Weight,
    compute: Callable[[Weight, BallFamily], WeightConstants],
    refine: bool,
) -> Tuple[float, bool]:
    """Weight constant on the dyadic family, with a divergence flag from two N-doublings when requested."""
    if not refine or w.descriptor.split(":")[0] not in ("power", "step", "const"):
        return compute(w, BallFamily.dyadic(w.box)).value, False
    refined = refined_constant(w.descriptor, w.box, compute)
    return refined.ladder[0], refined.divergent


def check_extrapolation_i(
    fam: OperatorFamily,
    p0: float,
    w0s: Sequence[Weight],
    targets: Sequence[Tuple[float, float, Weight]],
    Gs: Sequence[HalfSpaceFn],
    refine_weights: bool = True,
) -> CheckReport:
    """
    Extrapolation from a slice-wise L^{p0}(w0) estimate to T_r^p(w).

    Stage 1 measures the slice ratios ||T G(., t)||_{L^{p0}(w0)}/||G(., t)||_{L^{p0}(w0)}
    against [w0]_{A_{p0}}; stage 2 measures the tent-norm constant of the
    slice-wise extension at each (p, r, w) target and records the
    (weight constant, measured constant) pairs. Targets whose weight
    constant diverges under refinement are flagged and left out of the
    stability assertion.
    """
    require(p0 >= 1, f"p0 must be >= 1, got {p0}")
    require(all(p > 1 and r > 1 for p, r, _ in targets), "Targets need p, r > 1")
    measured: Dict[str, float] = {}
    skipped: List[str] = []
    notes: List[str] = []
    hypothesis: List[PsiPoint] = []

    for w0 in w0s:
        worst = 0.0
        for index, G in enumerate(Gs):
            for k, (t, g) in enumerate(G.slices()):
                bottom = lp_norm(g, p0, w0)
                if bottom == 0.0:
                    continue
                worst = max(worst, lp_norm(family_apply(fam, t, g), p0, w0) / bottom)
        constant = ap_constant(w0, p0, BallFamily.dyadic(w0.box)).value
        measured[f"hypothesis[{w0.descriptor}]"] = worst
        measured[f"A_p0[{w0.descriptor}]"] = constant
        hypothesis.append(PsiPoint(label=f"slice {w0.descriptor}", weight_constant=constant, measured_constant=worst))

    trace: List[PsiPoint] = []
    groups: Dict[str, str] = {}
    pairs = [(G, extend_slicewise(fam, G)) for G in Gs]
    for p, r, w in targets:
        key = f"target[p={p:g},r={r:g},{w.descriptor}]"
        local_skipped: List[str] = []
        constant = _worst_ratio(
            pairs,
            lambda pair: tent_norm(pair[1], r, p, w),
            lambda pair: tent_norm(pair[0], r, p, w),
            local_skipped,
            key,
        )
        skipped.extend(local_skipped)
        weight_constant, divergent = _weight_constant_with_flag(
            w, lambda v, family: ap_constant(v, p, family), refine_weights
        )
        if divergent:
            notes.append(f"{key}: [w]_A_p diverges under refinement, target flagged")
            measured[f"flagged:{key}"] = constant
            continue
        measured[f"{CONSTANT}{key}"] = constant
        trace.append(PsiPoint(label=key, weight_constant=weight_constant, measured_constant=constant))
        groups[key] = f"p={p:g},r={r:g}"

    ordered, broken = _grouped_psi(trace, lambda pt: groups[pt.label])
    ok = _all_finite(measured) and not broken
    reason = None
    if not _all_finite(measured):
        reason = "non-finite constant"
    elif broken:
        reason = f"psi trace not monotone-compatible for {', '.join(broken)}"
    return CheckReport(
        name="extrapolation_i",
        params=CheckParams(n=Gs[0].box.dim if Gs else None, p0=p0, family=fam.name),
        measured=measured,
        status=_status(ok),
        reason=reason,
        notes=notes,
        skipped=skipped,
        psi_trace=hypothesis + ordered,
    )


def check_coifman_fefferman_tent(
    Fs: Sequence[HalfSpaceFn],
    ps: Sequence[float],
    r: float,
    s_list: Sequence[float],
    w: Weight,
    family: Optional[BallFamily] = None,
) -> CheckReport:
    """
    Control of the Hilbert extension by the maximal extension in T_r^p(w) and T_r^{p,s}(w).

    Sweeps are restricted to p, s >= 1/2 (the discrete quasinorms are noisy
    below that).
    """
    require(all(p >= 0.5 for p in ps) and all(s >= 0.5 for s in s_list), "Sweeps need p, s >= 1/2")
    require(r > 0, f"Exponent r must be positive, got {r}")
    hilbert_fam = OperatorFamily.constant("hilbert")
    maximal_fam = OperatorFamily.constant("maximal", family=family)
    images = []
    for F in Fs:
        images.append((cone_functional(extend_slicewise(hilbert_fam, F), r), cone_functional(extend_slicewise(maximal_fam, F), r)))

    measured: Dict[str, float] = {}
    skipped: List[str] = []
    for p in ps:
        measured[f"{CONSTANT}p={p:g}"] = _worst_ratio(
            images, lambda pair: lp_norm(pair[0], p, w), lambda pair: lp_norm(pair[1], p, w), skipped, f"p={p:g}"
        )
        for s in s_list:
            measured[f"{CONSTANT}p={p:g},s={s:g}"] = _worst_ratio(
                images,
                lambda pair: lorentz_quasinorm(pair[0], p, s, w),
                lambda pair: lorentz_quasinorm(pair[1], p, s, w),
                skipped,
                f"p={p:g},s={s:g}",
            )
    weight_constant = ainfty_constant(w, family or BallFamily.dyadic(w.box), AINFTY_GRID).value
    measured["A_inf"] = weight_constant
    ok = _all_finite(measured)
    return CheckReport(
        name="coifman_fefferman_tent",
        params=CheckParams(n=w.box.dim, N=[w.box.cells_per_axis], r=r, weight=w.descriptor, family="hilbert/maximal", extra={"ps": list(ps), "ss": list(s_list)}),
        measured=measured,
        status=_status(ok),
        reason=None if ok else "non-finite constant",
        skipped=sorted(set(skipped)),
        notes=["sweeps restricted to p, s >= 1/2"],
    )


def check_fractional(
    alpha: float,
    pq_pairs: Sequence[Tuple[float, float]],
    r: float,
    ws: Sequence[Weight],
    fs: Sequence[GridFn],
    Fs: Sequence[HalfSpaceFn],
    control_ps: Sequence[float] = (0.5, 1.0, 2.0),
    control_ws: Optional[Sequence[Weight]] = None,
    refine_weights: bool = True,
) -> CheckReport:
    """
    Fractional operators: base-space and tent-space L^p(w^p) -> L^q(w^q)
    constants of the Riesz potential, and its control by the fractional
    maximal extension in T_r^p(w).

    Weights whose A_{p,q} estimate diverges under refinement are flagged:
    their constants are recorded under "flagged:" keys and left out of the
    psi trace and the stability assertion.

    Raises:
        ParameterError: If alpha is outside (0, n) or a pair violates 1/p - 1/q = alpha/n
    """
    n = (fs[0].box if fs else Fs[0].box).dim
    require(0 < alpha < n, f"Order alpha must lie in (0, {n}), got {alpha}")
    for p, q in pq_pairs:
        require(1 < p <= q < math.inf, f"Pairs need 1 < p <= q < inf, got ({p}, {q})")
        require(abs(1.0 / p - 1.0 / q - alpha / n) <= 1e-12, f"1/p - 1/q must equal alpha/n for ({p}, {q})")
    riesz = OperatorFamily.constant("riesz", alpha=alpha)
    frac = OperatorFamily.constant("frac_maximal", alpha=alpha)
    measured: Dict[str, float] = {}
    skipped: List[str] = []
    notes: List[str] = []
    trace: List[PsiPoint] = []

    base_images = [family_apply(riesz, 1.0, f) for f in fs]
    tent_images = [extend_slicewise(riesz, F) for F in Fs]
    for p, q in pq_pairs:
        for w in ws:
            wp, wq = w.power(p), w.power(q)
            tag = f"p={p:g},q={q:g},{w.descriptor}"
            measured[f"{CONSTANT}base[{tag}]"] = _worst_ratio(
                list(zip(fs, base_images)), lambda pair: lp_norm(pair[1], q, wq), lambda pair: lp_norm(pair[0], p, wp), skipped, f"base[{tag}]"
            )
            tent_constant = _worst_ratio(
                list(zip(Fs, tent_images)),
                lambda pair: tent_norm(pair[1], r, q, wq),
                lambda pair: tent_norm(pair[0], r, p, wp),
                skipped,
                f"tent[{tag}]",
            )
            weight_constant, divergent = _weight_constant_with_flag(
                w, lambda v, family: apq_constant(v, p, q, family), refine_weights
            )
            measured[f"A_pq[{tag}]"] = weight_constant
            if divergent:
                notes.append(f"{tag}: [w]_A_pq diverges under refinement, weight flagged")
                measured[f"flagged:tent[{tag}]"] = tent_constant
                measured[f"flagged:base[{tag}]"] = measured.pop(f"{CONSTANT}base[{tag}]")
                continue
            measured[f"{CONSTANT}tent[{tag}]"] = tent_constant
            trace.append(PsiPoint(label=f"tent[p={p:g},q={q:g}] {w.descriptor}", weight_constant=weight_constant, measured_constant=tent_constant))

    frac_images = [extend_slicewise(frac, F) for F in Fs]
    for p in control_ps:
        for w in control_ws if control_ws is not None else ws:
            tag = f"p={p:g},{w.descriptor}"
            measured[f"{CONSTANT}control[{tag}]"] = _worst_ratio(
                list(zip(tent_images, frac_images)),
                lambda pair: tent_norm(pair[0], r, p, w),
                lambda pair: tent_norm(pair[1], r, p, w),
                skipped,
                f"control[{tag}]",
            )

    if r <= n / (n - alpha):
        notes.append(f"r = {r:g} <= n/(n - alpha) = {n / (n - alpha):g}: no lower restriction on r")
    ordered, broken = _grouped_psi(trace, lambda pt: pt.label.split(" ")[0])
    ok = _all_finite(measured) and not broken
    reason = None
    if not _all_finite(measured):
        reason = "non-finite constant"
    elif broken:
        reason = f"psi trace not monotone-compatible for {', '.join(broken)}"
    return CheckReport(
        name="fractional",
        params=CheckParams(n=n, r=r, alpha=alpha, extra={"pairs": [list(pair) for pair in pq_pairs]}),
        measured=measured,
        status=_status(ok),
        reason=reason,
        notes=notes,
        skipped=sorted(set(skipped)),
        psi_trace=ordered,
    )


def decay_confirmed(profile: OffDiagProfile, m_claim: float) -> Tuple[bool, str]:
    """
    Decide whether a profile supports decay of order m_claim.

    Either the fit reaches m_claim, or the ratios are positive for some
    0 < d <= t and exactly zero for every d > t (support-limited decay).
    A profile with no positive ratio at a positive gap carries no decay
    information.
    """
    positive_gap = [pt for pt in profile.points if pt.d > 0]
    if not any(pt.ratio > FIT_FLOOR for pt in positive_gap):
        return False, "insufficient decay: no positive ratio at a positive gap"
    beyond = [pt for pt in positive_gap if pt.d > pt.t]
    if beyond and all(pt.ratio == 0.0 for pt in beyond):
        return True, "support-limited: ratios vanish for d > t"
    if profile.m_fit >= m_claim:
        return True, f"fitted order {profile.m_fit:.3g} >= {m_claim:g}"
    return False, f"insufficient decay: fitted order {profile.m_fit:.3g} < {m_claim:g}"


def check_offdiag_proposition(
    fam: OperatorFamily,
    r: float,
    m_claim: float,
    targets: Sequence[Tuple[float, Weight]],
    probes: Sequence[GridFn],
    geometry: Sequence[OffDiagGeometry],
    Fs: Sequence[HalfSpaceFn],
) -> CheckReport:
    """
    Off-diagonal decay of order M > n/r implies boundedness of the slice-wise
    extension on T_r^p(w) for w in A_{pM/n}.

    Stage 1 profiles the decay; when it does not confirm m_claim the report
    fails with "insufficient decay" and stage 2 is skipped.

    Raises:
        ParameterError: If m_claim <= n/r or a target has p <= n/m_claim
        UnsupportedFamilyError: If the family is sublinear
    """
    box = probes[0].box
    n = box.dim
    require(r > 1, f"Exponent r must exceed 1, got {r}")
    require(m_claim > n / r, f"Decay order must exceed n/r = {n / r:g}, got {m_claim}")
    require(all(n / m_claim < p for p, _ in targets), "Targets need p > n/M")
    profile = offdiag_profile(fam, r, probes, geometry)
    confirmed, verdict = decay_confirmed(profile, m_claim)
    params = CheckParams(n=n, N=[box.cells_per_axis], r=r, M=m_claim, family=fam.name)
    measured: Dict[str, float] = {"M_fit": profile.m_fit}
    if not confirmed:
        return CheckReport(
            name="offdiag_proposition",
            params=params,
            measured=measured,
            status=CheckStatus.FAIL,
            reason=verdict,
            notes=["stage 2 skipped"],
            profile=profile,
        )

    skipped: List[str] = []
    pairs = [(F, extend_slicewise(fam, F)) for F in Fs]
    for p, w in targets:
        key = f"target[p={p:g},{w.descriptor}]"
        measured[f"{CONSTANT}{key}"] = _worst_ratio(
            pairs,
            lambda pair: tent_norm(pair[1], r, p, w),
            lambda pair: tent_norm(pair[0], r, p, w),
            skipped,
            key,
        )
        measured[f"A_pM/n[{w.descriptor},p={p:g}]"] = ap_constant(w, p * m_claim / n, BallFamily.dyadic(w.box)).value
    ok = _all_finite(measured)
    return CheckReport(
        name="offdiag_proposition",
        params=params,
        measured=measured,
        status=_status(ok),
        reason=None if ok else "non-finite constant",
        notes=[verdict],
        skipped=skipped,
        profile=profile,
    )


def check_rdf_properties(
    h: GridFn,
    w: Weight,
    p: float,
    depth: int,
    probes: Sequence[GridFn] = (),
    family: Optional[BallFamily] = None,
) -> CheckReport:
    """
    Rubio de Francia iteration properties:
    (a) R h >= h, (b) M(R h) <= 2B R h + tail, (c) ||R h|| <= 2 ||h|| (1 + 2^-depth).

    The norm bound B is twice the largest observed ratio over the probes
    and the iterates M^k h themselves.
    """
    family = family or BallFamily.dyadic(h.box)
    iterates = [h]
    for _ in range(depth):
        iterates.append(maximal(iterates[-1], family))
    candidates = [f for f in list(probes) + iterates if np.any(f.values != 0)]
    if not candidates:
        candidates = [GridFn.constant(h.box, 1.0)]
    bound = maximal_opnorm_estimate(w, p, candidates, family)
    result = rdf_iterate(h, w, p, depth, bound, family)
    majorant = result.majorant.values

    below = float(np.max(h.values - majorant))
    spread = maximal(result.majorant, family).values
    excess = float(np.max(spread - (2.0 * bound * majorant + result.tail.values)))
    scale = float(np.max(np.abs(spread))) if spread.size else 0.0
    norm_h, norm_rh = lp_norm(h, p, w), lp_norm(result.majorant, p, w)
    norm_limit = 2.0 * norm_h * (1.0 + 2.0 ** (-depth))

    failures = []
    if below > 0.0:
        failures.append("(a) R h < h somewhere")
    if excess > 1e-10 * max(scale, 1.0):
        failures.append("(b) M(R h) exceeds 2B R h + tail")
    if norm_rh > norm_limit + 1e-10 * max(norm_h, 1.0):
        failures.append("(c) ||R h|| exceeds 2 ||h|| (1 + 2^-depth)")
    return CheckReport(
        name="rdf_properties",
        params=CheckParams(n=h.box.dim, N=[h.box.cells_per_axis], p=p, weight=w.descriptor, family=family.descriptor, extra={"depth": depth}),
        measured={
            "norm_bound": bound,
            "norm_ratio": norm_rh / norm_h if norm_h > 0 else 0.0,
            "max_excess_b": excess,
            "tail_bound": result.tail_bound,
        },
        bound=2.0 * (1.0 + 2.0 ** (-depth)),
        slack=result.tail_bound,
        status=_status(not failures),
        reason="; ".join(failures) or None,
    )


def check_weight_doubling(w: Weight, p: float, lams: Sequence[float], t_list: Sequence[float], family: Optional[BallFamily] = None) -> CheckReport:
    """
    Doubling w(lam B) <= [w]_{A_p} (|lam B|/|B|)^p w(B) and the pointwise scaling
    W_{lam t} <= [w]_{A_p} (|B_{lam t}|/|B_t|)^{p-1} W_t, with discrete ball measures.
    """
    family = family or BallFamily.dyadic(w.box)
    measured: Dict[str, float] = {}
    worst = 0.0
    for lam in lams:
        ratio, relative = doubling_ratio(w, p, family, lam)
        measured[f"doubling[{lam:g}]"] = ratio
        worst = max(worst, relative)
        for t in t_list:
            ratio, relative = averaged_weight_scaling(w, p, t, lam)
            measured[f"scaling[{lam:g},t={t:g}]"] = ratio
            worst = max(worst, relative)
    measured["max_relative"] = worst
    ok = worst <= 1.0 + ROUNDING
    return CheckReport(
        name="weight_doubling",
        params=CheckParams(n=w.box.dim, N=[w.box.cells_per_axis], p=p, weight=w.descriptor, family=family.descriptor),
        measured=measured,
        bound=1.0,
        status=_status(ok),
        reason=None if ok else "a ratio exceeds its A_p bound",
    )


def check_apq_equivalence(w: Weight, p: float, q: float, family: Optional[BallFamily] = None, rtol: Optional[float] = None) -> CheckReport:
    """[w]_{A_{p,q}} = [w^q]_{A_{1+q/p'}} on the same family."""
    rtol = config.IDENTITY_RTOL if rtol is None else rtol
    family = family or BallFamily.dyadic(w.box)
    lhs = apq_constant(w, p, q, family).value
    exponent = 1.0 + q * (p - 1.0) / p
    rhs = ap_constant(w.power(q), exponent, family).value
    error = relative_error(lhs, rhs)
    return CheckReport(
        name="apq_equivalence",
        params=CheckParams(n=w.box.dim, N=[w.box.cells_per_axis], p=p, weight=w.descriptor, family=family.descriptor, extra={"q": q}),
        measured={"A_pq": lhs, "A_1+q/p'": rhs, "rel_error": error},
        bound=rtol,
        status=_status(error <= rtol),
        reason=None if error <= rtol else "identity residual above tolerance",
    )


def check_offdiag_annular(fam: OperatorFamily, r: float, m: float, t: float, fs: Sequence[GridFn]) -> CheckReport:
    """
    Annular localisation (avg_{B(x,t)} |T_t f|^r)^{1/r} <= C sum_j 2^{-j(M - n/r)} (avg_{B(x,2^j t)} |f|^r)^{1/r}.

    Reports the empirical C over the probes and interior centres.
    """
    require(r >= 1 and t > 0, "Annular check needs r >= 1 and t > 0")
    box = fs[0].box
    n = box.dim
    require(m > n / r, f"Decay order must exceed n/r = {n / r:g}, got {m}")
    reach = 2.0 * box.half_width * math.sqrt(n)
    radii = [t * 2 ** j for j in range(int(math.ceil(math.log2(max(reach / t, 1.0)))) + 1)]
    centres = unclipped_centres(box.shape, box.stencil(t))
    worst = 0.0
    skipped: List[str] = []
    for index, f in enumerate(fs):
        powered = f.with_values(np.abs(f.values) ** r)
        image = family_apply(fam, t, f)
        lhs = ball_averages(image.with_values(np.abs(image.values) ** r), t).values ** (1.0 / r)
        rhs = np.zeros(box.shape)
        for j, radius in enumerate(radii):
            rhs += 2.0 ** (-j * (m - n / r)) * ball_averages(powered, radius).values ** (1.0 / r)
        valid = centres & (rhs > 0)
        if not np.any(valid):
            skipped.append(f"f#{index}: vanishing right-hand side")
            continue
        worst = max(worst, float(np.max(lhs[valid] / rhs[valid])))
    measured = {f"{CONSTANT}annular": worst}
    return CheckReport(
        name="offdiag_annular",
        params=CheckParams(n=n, N=[box.cells_per_axis], r=r, M=m, family=fam.name, extra={"t": t}),
        measured=measured,
        status=_status(_all_finite(measured)),
        skipped=skipped,
    )


def check_local_maximal(fs: Sequence[GridFn], r: float, t_list: Sequence[float], family: Optional[BallFamily] = None) -> CheckReport:
    """
    Local maximal estimate (avg_{B(x,t)} (Mf)^r)^{1/r} <= C [(avg_{B(x,2t)} |f|^r)^{1/r} + M(avg_{B(., t)} |f|)(x)].
    """
    require(r > 1, f"Exponent r must exceed 1, got {r}")
    worst = 0.0
    skipped: List[str] = []
    box = fs[0].box
    for index, f in enumerate(fs):
        spread = maximal(f, family).values
        for t in t_list:
            lhs = ball_averages(f.with_values(spread ** r), t).values ** (1.0 / r)
            local = ball_averages(f.with_values(np.abs(f.values) ** r), 2.0 * t).values ** (1.0 / r)
            tail = maximal(ball_averages(f.abs(), t), family).values
            rhs = local + tail
            valid = rhs > 0
            if not np.any(valid):
                skipped.append(f"f#{index} t={t:g}: vanishing right-hand side")
                continue
            worst = max(worst, float(np.max(lhs[valid] / rhs[valid])))
    measured = {f"{CONSTANT}local": worst}
    return CheckReport(
        name="local_maximal",
        params=CheckParams(n=box.dim, N=[box.cells_per_axis], r=r, family="maximal", extra={"t": list(t_list)}),
        measured=measured,
        status=_status(_all_finite(measured)),
        skipped=skipped,
    )


def check_weight_constant(
    descriptor: str,
    box: Box,
    weight_class: str,
    exponent: Optional[float] = None,
    q: Optional[float] = None,
    doublings: int = 2,
) -> CheckReport:
    """
    Weight-class constant along N, 2N, 4N with the divergence flag.

    A divergent estimate gives status "divergent"; this is the designed
    outcome of negative controls such as power:-1.5 in A_2.
    """
    computations = {
        "A_p": lambda w, fam: ap_constant(w, exponent, fam),
        "A_inf": lambda w, fam: ainfty_constant(w, fam, AINFTY_GRID),
        "RH_s": lambda w, fam: rh_constant(w, exponent, fam),
        "A_pq": lambda w, fam: apq_constant(w, exponent, q, fam),
    }
    require(weight_class in computations, f"Unknown weight class '{weight_class}'")
    require(weight_class == "A_inf" or exponent is not None, f"{weight_class} needs an exponent")
    require(weight_class != "A_pq" or q is not None, "A_pq needs q")
    result = refined_constant(descriptor, box, computations[weight_class], doublings=doublings)
    ok = all(math.isfinite(v) for v in result.ladder)
    status = CheckStatus.DIVERGENT if result.divergent else _status(ok)
    return CheckReport(
        name="weight_constant",
        params=CheckParams(
            n=box.dim,
            N=[box.cells_per_axis * 2 ** k for k in range(doublings + 1)],
            p=exponent,
            weight=descriptor,
            family=result.family,
            extra={"class": weight_class, **({"q": q} if q is not None else {})},
        ),
        measured={"value": result.value, "growth": result.ladder[-1] / result.ladder[-2] if len(result.ladder) > 1 else 1.0},
        series={"ladder": result.ladder},
        status=status,
        reason="estimate diverges under refinement" if result.divergent else None,
    )


def _labelled(label: str, key: str) -> str:
    if key.startswith(CONSTANT):
        return f"{CONSTANT}{label}/{key[len(CONSTANT):]}"
    return f"{label}/{key}"


def combine_reports(name: str, parts: Sequence[Tuple[str, CheckReport]]) -> CheckReport:
    """
    Merge the reports of several instances of one check into a single report.

    Measurement keys are prefixed with the instance label; the first
    non-passing instance decides the status.
    """
    require(len(parts) > 0, "Nothing to combine")
    if len(parts) == 1:
        return parts[0][1].model_copy(update={"name": name})
    measured: Dict[str, float] = {}
    series: Dict[str, List[float]] = {}
    notes: List[str] = []
    skipped: List[str] = []
    psi: List[PsiPoint] = []
    status, reason = CheckStatus.PASS, None
    slacks = [report.slack for _, report in parts if report.slack is not None]
    for label, report in parts:
        measured.update({_labelled(label, k): v for k, v in report.measured.items()})
        series.update({_labelled(label, k): v for k, v in report.series.items()})
        notes.extend(f"{label}: {n}" for n in report.notes)
        skipped.extend(f"{label}: {s}" for s in report.skipped)
        psi.extend(report.psi_trace)
        if report.status != CheckStatus.PASS and status == CheckStatus.PASS:
            status, reason = report.status, f"{label}: {report.reason}"
    first = parts[0][1]
    return first.model_copy(
        update={
            "name": name,
            "measured": measured,
            "series": series,
            "slack": max(slacks) if slacks else None,
            "status": status,
            "reason": reason,
            "notes": notes,
            "skipped": skipped,
            "psi_trace": psi,
        }
    )
