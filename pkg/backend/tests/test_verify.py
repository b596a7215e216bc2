import math

import numpy as np
import pytest

from app.corpus import Domain, full_box, random_halfspace_shapes, random_shapes
from app.errors import ParameterError
from app.grid import Box, GridFn
from app.operators import OffDiagGeometry, OperatorFamily
from app.schemas import CheckParams, CheckReport, CheckStatus, OffDiagPoint, OffDiagProfile, PsiPoint, ResolutionStep
from app.verify import (
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
    decay_confirmed,
    over_ladder,
    psi_trace,
    require_tightening,
)
from app.weights import Weight, constant_weight, make_weight, power_weight

SEED = 20240601
DOMAIN = Domain.default(1)


@pytest.fixture
def grid():
    return DOMAIN.grids(ResolutionStep(cells=64, levels=6))


@pytest.fixture
def corpus(grid):
    box, tlevels = grid
    return [shape.sample(box, tlevels) for shape in random_halfspace_shapes(SEED, DOMAIN, 4)]


@pytest.fixture
def bases(grid):
    box, _ = grid
    return [shape.sample(box) for shape in random_shapes(SEED, DOMAIN, 3)]


def test_psi_trace_sorts_and_detects_drops():
    points = [
        PsiPoint(label="c", weight_constant=3.0, measured_constant=1.0),
        PsiPoint(label="a", weight_constant=1.0, measured_constant=2.0),
        PsiPoint(label="b", weight_constant=2.0, measured_constant=1.9),
    ]
    ordered, ok = psi_trace(points, tol=0.25)
    assert [pt.label for pt in ordered] == ["a", "b", "c"]
    assert not ok
    _, ok = psi_trace(points[1:], tol=0.25)
    assert ok


def _probe_report(value):
    return CheckReport(name="probe", params=CheckParams(n=1), measured={"C:x": value, "plain": value})


def test_over_ladder_records_series_and_drift():
    ladder = [ResolutionStep(cells=16, levels=2), ResolutionStep(cells=32, levels=4)]
    report = over_ladder("probe", DOMAIN, ladder, lambda box, tlevels: _probe_report(1.0 + box.cells_per_axis / 320.0))
    assert report.status == CheckStatus.PASS
    assert report.series["C:x"] == pytest.approx([1.05, 1.1])
    assert report.measured["drift:x"] == pytest.approx(0.05 / 1.05)
    assert "drift:plain" not in report.measured
    assert report.params.N == [16, 32]
    assert report.params.K == [2, 4]


def test_over_ladder_fails_on_unstable_constants():
    ladder = [ResolutionStep(cells=16, levels=2), ResolutionStep(cells=32, levels=4)]
    report = over_ladder("probe", DOMAIN, ladder, lambda box, tlevels: _probe_report(float(box.cells_per_axis)))
    assert report.status == CheckStatus.FAIL
    assert "drifts" in report.reason


def test_over_ladder_rejects_empty_ladder():
    with pytest.raises(ParameterError):
        over_ladder("probe", DOMAIN, [], lambda box, tlevels: _probe_report(1.0))


def test_combine_reports_prefixes_keys():
    first = _probe_report(1.0)
    second = _probe_report(2.0).model_copy(update={"status": CheckStatus.FAIL, "reason": "bad"})
    merged = combine_reports("both", [("one", first), ("two", second)])
    assert merged.measured == {"C:one/x": 1.0, "one/plain": 1.0, "C:two/x": 2.0, "two/plain": 2.0}
    assert merged.status == CheckStatus.FAIL
    assert merged.reason == "two: bad"
    assert combine_reports("single", [("one", first)]).measured == first.measured


def test_lemma_aver_holds_and_skips_boundary_samples(grid, bases):
    box, _ = grid
    rng = np.random.default_rng(3)
    radii = rng.choice([0.25, 0.5, 1.0], size=(40, 2))
    samples = [(box.cell_index(rng.uniform(-0.8, 0.8)), float(s), float(t)) for s, t in radii]
    samples.append(((0,), 1.0, 1.0))
    report = check_lemma_aver(bases[0], samples)
    assert report.status == CheckStatus.PASS
    assert report.measured["samples"] == 40.0
    assert len(report.skipped) == 1


def test_lemma_aver_needs_non_negative_input(grid):
    box, _ = grid
    with pytest.raises(ParameterError):
        check_lemma_aver(GridFn.constant(box, -1.0), [((32,), 0.5, 0.5)])


@pytest.mark.parametrize(
    "ratios, status",
    [
        ([1.5, 1.9, 1.99], CheckStatus.PASS),
        ([2.4, 2.2, 2.05], CheckStatus.PASS),
        ([1.9, 2.0, 2.0], CheckStatus.PASS),
        ([2.1, 2.2, 2.3], CheckStatus.FAIL),
        ([1.9, 2.1], CheckStatus.FAIL),
    ],
)
def test_lemma_ratio_must_tighten_under_refinement(ratios, status):
    report = CheckReport(name="lemma_aver", measured={"max_ratio": ratios[-1]}, series={"max_ratio": ratios}, bound=2.0)
    checked = require_tightening(report, "max_ratio")
    assert checked.status == status
    assert checked.measured["excess:max_ratio"] == pytest.approx(max(0.0, ratios[-1] / 2.0 - 1.0))
    if status == CheckStatus.FAIL:
        assert checked.reason.startswith("max_ratio exceeds the bound")


def test_tightening_keeps_earlier_failures():
    report = CheckReport(name="lemma_aver", series={"max_ratio": [2.5]}, bound=2.0, status=CheckStatus.FAIL, reason="1 of 3 samples exceed 2^n (1 + slack)")
    assert require_tightening(report, "max_ratio").reason == report.reason
    assert require_tightening(CheckReport(name="x"), "max_ratio") == CheckReport(name="x")


@pytest.mark.parametrize("descriptor", ["power:0.5", "step:1:4"])
def test_averaged_weight_class(grid, descriptor):
    box, _ = grid
    report = check_averaged_weight_class(make_weight(descriptor, box), 2.0, [0.25, 0.5])
    assert report.status == CheckStatus.PASS
    assert "A_p[W_t]@t=0.25" in report.measured


def test_fubini_on_seeded_instances(grid, corpus):
    box, _ = grid
    rng = np.random.default_rng(9)
    instances = [(F, r, Weight(box=box, values=rng.uniform(0.1, 10.0, size=box.shape))) for F, r in zip(corpus, (1.5, 2.0, 3.0))]
    report = check_fubini(instances)
    assert report.status == CheckStatus.PASS
    assert report.measured["max_rel_error"] <= report.bound
    assert len(report.series["rel_error"]) == 3


def test_maximal_tent_strong(grid, corpus):
    box, _ = grid
    report = check_maximal_tent_strong(corpus, 2.0, 2.0, power_weight(0.5, box))
    assert report.status == CheckStatus.PASS
    assert math.isfinite(report.measured["C:maximal"])
    assert len(report.psi_trace) == 1
    with pytest.raises(ParameterError):
        check_maximal_tent_strong(corpus, 1.0, 2.0, power_weight(0.5, box))


def test_maximal_tent_weak(grid, corpus):
    box, _ = grid
    report = check_maximal_tent_weak(corpus, 2.0, power_weight(-0.5, box))
    assert report.status == CheckStatus.PASS
    assert report.params.s == math.inf
    assert report.psi_trace[0].measured_constant == report.measured["C:weak"]


@pytest.mark.parametrize("descriptor", ["const:1", "power:-0.5"])
def test_maximal_tent_weak_stays_below_strong_near_one(grid, corpus, descriptor):
    box, _ = grid
    report = check_maximal_tent_weak(corpus, 1.5, make_weight(descriptor, box))
    assert report.status == CheckStatus.PASS
    assert report.measured["C:weak"] <= report.measured["strong_p1.05"] * (1 + 1e-12)
    assert report.measured["strong_p1.05"] >= 1.0 - 1e-12
    with pytest.raises(ParameterError):
        check_maximal_tent_weak(corpus, 1.5, make_weight(descriptor, box), p_near=1.0)


def test_extrapolation_records_both_stages(grid, corpus):
    box, _ = grid
    targets = [(2.0, 2.0, power_weight(a, box)) for a in (0.0, 0.25)]
    report = check_extrapolation_i(OperatorFamily.constant("maximal"), 2.0, [constant_weight(1.0, box)], targets, corpus, refine_weights=False)
    assert "hypothesis[const:1]" in report.measured
    assert "C:target[p=2,r=2,power:0.25]" in report.measured
    assert len(report.psi_trace) == 3


def test_coifman_fefferman_restricts_exponents(grid, corpus):
    box, _ = grid
    w = constant_weight(1.0, box)
    report = check_coifman_fefferman_tent(corpus[:2], [1.0, 2.0], 2.0, [1.0, math.inf], w)
    assert report.status == CheckStatus.PASS
    assert "C:p=1,s=inf" in report.measured
    with pytest.raises(ParameterError):
        check_coifman_fefferman_tent(corpus[:2], [0.25], 2.0, [1.0], w)


def test_fractional(grid, corpus, bases):
    box, _ = grid
    ws = [power_weight(0.0, box)]
    report = check_fractional(0.5, [(4.0 / 3.0, 4.0)], 1.5, ws, bases, corpus[:2], control_ps=(1.0,))
    assert report.status == CheckStatus.PASS
    assert report.notes
    assert "C:control[p=1,power:0]" in report.measured
    with pytest.raises(ParameterError):
        check_fractional(0.5, [(2.0, 3.0)], 1.5, ws, bases, corpus[:2])


def test_fractional_flags_weights_outside_apq(grid, corpus, bases):
    box, _ = grid
    ws = [power_weight(a, box) for a in (0.0, 0.125, 0.25, 0.375)]
    report = check_fractional(0.5, [(4.0 / 3.0, 4.0)], 1.5, ws, bases, corpus[:2], control_ps=(1.0,))
    assert "flagged:tent[p=1.33333,q=4,power:0.375]" in report.measured
    assert "C:tent[p=1.33333,q=4,power:0.375]" not in report.measured
    assert any("power:0.375" in note and "diverges" in note for note in report.notes)
    traced = {pt.label for pt in report.psi_trace}
    assert traced == {f"tent[p=1.33333,q=4] power:{a:g}" for a in (0, 0.125, 0.25)}
    weight_constants = [pt.weight_constant for pt in report.psi_trace]
    assert weight_constants == sorted(weight_constants)


def _offdiag_inputs(box, bases):
    probes = [full_box(DOMAIN).sample(box)] + bases
    geometry = [OffDiagGeometry(gap_cells=int(round(g * 0.5 / box.h)), t=0.5) for g in (0.5, 1.0, 2.0, 4.0)]
    return probes, geometry


def test_offdiag_identity_is_a_designed_failure(grid, bases, corpus):
    box, _ = grid
    probes, geometry = _offdiag_inputs(box, bases)
    report = check_offdiag_proposition(OperatorFamily.identity(), 2.0, 2.0, [(2.0, constant_weight(1.0, box))], probes, geometry, corpus)
    assert report.status == CheckStatus.FAIL
    assert report.reason.startswith("insufficient decay")
    assert report.notes == ["stage 2 skipped"]
    flagged = report.model_copy(update={"expect_fail": True})
    assert flagged.succeeded
    assert flagged.outcome == "expected-fail: pass"


def test_offdiag_averaging_is_support_limited(grid, bases, corpus):
    box, _ = grid
    probes, geometry = _offdiag_inputs(box, bases)
    report = check_offdiag_proposition(OperatorFamily.averaging(), 2.0, 2.0, [(2.0, power_weight(0.25, box))], probes, geometry, corpus)
    assert report.status == CheckStatus.PASS
    assert report.notes[0].startswith("support-limited")
    assert len(report.profile.points) == 4
    assert report.profile.points[0].ratio > 0.0


def test_offdiag_needs_order_above_n_over_r(grid, bases, corpus):
    box, _ = grid
    probes, geometry = _offdiag_inputs(box, bases)
    with pytest.raises(ParameterError):
        check_offdiag_proposition(OperatorFamily.averaging(), 2.0, 0.4, [], probes, geometry, corpus)


@pytest.mark.parametrize(
    "points, expected",
    [
        ([(1.0, 0.0), (2.0, 0.0)], False),
        ([(0.5, 0.3), (2.0, 0.0), (4.0, 0.0)], True),
    ],
)
def test_decay_confirmed_support(points, expected):
    profile = OffDiagProfile(r=2.0, points=[OffDiagPoint(t=1.0, d=d, ratio=ratio) for d, ratio in points], m_fit=math.inf)
    assert decay_confirmed(profile, 2.0)[0] is expected


def test_decay_confirmed_uses_the_fit():
    points = [OffDiagPoint(t=1.0, d=d, ratio=(1 + d) ** -3.0) for d in (0.5, 1.0, 2.0)]
    assert decay_confirmed(OffDiagProfile(r=2.0, points=points, m_fit=3.0), 2.0)[0]
    ok, verdict = decay_confirmed(OffDiagProfile(r=2.0, points=points, m_fit=1.5), 2.0)
    assert not ok
    assert verdict.startswith("insufficient decay")


def test_rdf_properties(grid, bases):
    box, _ = grid
    report = check_rdf_properties(bases[0], power_weight(0.25, box), 2.0, depth=8)
    assert report.status == CheckStatus.PASS
    assert report.params.extra["depth"] == 8


def test_weight_doubling_and_apq(grid):
    box, _ = grid
    assert check_weight_doubling(power_weight(0.5, box), 2.0, [2.0, 3.0], [0.25]).status == CheckStatus.PASS
    assert check_apq_equivalence(power_weight(0.125, box), 4.0 / 3.0, 4.0).status == CheckStatus.PASS


def test_offdiag_annular_and_local_maximal(grid, bases):
    annular = check_offdiag_annular(OperatorFamily.heat(), 2.0, 2.0, 0.25, bases)
    assert annular.status == CheckStatus.PASS
    assert math.isfinite(annular.measured["C:annular"])
    local = check_local_maximal(bases, 2.0, [0.25, 0.5])
    assert local.status == CheckStatus.PASS
    assert local.measured["C:local"] > 0.0


def test_weight_constant_flags_divergence():
    box = Box(dim=1, half_width=4.0, cells_per_axis=32)
    report = check_weight_constant("power:-1.5", box, "A_p", 2.0)
    assert report.status == CheckStatus.DIVERGENT
    assert len(report.series["ladder"]) == 3
    assert report.model_copy(update={"expect_fail": True}).succeeded
    assert check_weight_constant("power:0.5", box, "A_p", 2.0).status == CheckStatus.PASS


def test_weight_constant_requires_parameters():
    box = Box(dim=1, half_width=4.0, cells_per_axis=32)
    with pytest.raises(ParameterError):
        check_weight_constant("power:0.5", box, "A_pq", 2.0)
    with pytest.raises(ParameterError):
        check_weight_constant("power:0.5", box, "B_p", 2.0)
