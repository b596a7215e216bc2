import math

import numpy as np
import pytest

from app.errors import ParameterError
from app.grid import (
    WEAK,
    Box,
    GridFn,
    HalfSpaceFn,
    TLevels,
    ball_average,
    ball_averages,
    discrete_ball,
    lorentz_quasinorm,
    lp_norm,
    weighted_measure,
)
from app.weights import Weight, power_weight
from tests import oracles


def test_box_geometry(box1d):
    assert box1d.h == pytest.approx(0.25)
    assert box1d.measure == pytest.approx(8.0)
    assert box1d.axis_centres[0] == pytest.approx(-3.875)
    assert box1d.cell_index(0.01) == (16,)
    assert box1d.cell_index(100.0) == (31,)


def test_box_validation():
    with pytest.raises(ValueError):
        Box(dim=3, half_width=1.0, cells_per_axis=8)
    with pytest.raises(ValueError):
        Box(dim=1, half_width=1.0, cells_per_axis=1)


def test_gridfn_values_are_frozen(box1d):
    f = GridFn.constant(box1d, 2.0)
    with pytest.raises(ValueError):
        f.values[0] = 1.0


def test_gridfn_rejects_non_finite(box1d):
    with pytest.raises(ValueError):
        GridFn(box=box1d, values=np.full(box1d.shape, np.nan))


def test_tlevels_are_log_midpoints():
    levels = TLevels(t_min=1.0, t_max=16.0, count=4)
    assert levels.delta == pytest.approx(math.log(16.0) / 4)
    np.testing.assert_allclose(levels.levels, 2.0 ** (np.arange(4) + 0.5))
    with pytest.raises(ValueError):
        TLevels(t_min=2.0, t_max=1.0, count=3)


def test_halfspace_shape_is_checked(box1d, tlevels):
    F = HalfSpaceFn.constant_in_t(GridFn.constant(box1d, 1.0), tlevels)
    assert F.values.shape == (tlevels.count,) + box1d.shape
    with pytest.raises(ValueError):
        HalfSpaceFn(box=box1d, tlevels=tlevels, values=np.ones(5))


def test_discrete_ball_uses_strict_membership(box1d):
    # radius exactly h: only the centre cell
    assert discrete_ball(box1d, (10,), box1d.h).count == 1
    ball = discrete_ball(box1d, (0,), 3 * box1d.h)
    assert ball.count == 3
    assert ball.measure == pytest.approx(3 * box1d.h)


def test_ball_average_matches_vectorised(box2d, rng):
    f = GridFn(box=box2d, values=rng.random(box2d.shape))
    averages = ball_averages(f, 0.5)
    for x in [(0, 0), (5, 6), (11, 3)]:
        assert ball_average(f, x, 0.5) == pytest.approx(averages.values[x])
    with pytest.raises(ParameterError):
        ball_average(f, (0, 0), 0.0)


def test_lp_norm_of_constant(box1d):
    f = GridFn.constant(box1d, 3.0)
    assert lp_norm(f, 2.0) == pytest.approx(3.0 * math.sqrt(8.0))
    assert lp_norm(f, 0.5) == pytest.approx(3.0 * 8.0 ** 2)
    with pytest.raises(ParameterError):
        lp_norm(f, 0.0)


def test_weighted_measure(box1d):
    w = power_weight(0.0, box1d)
    mask = np.zeros(box1d.shape, dtype=bool)
    mask[:4] = True
    assert weighted_measure(mask, w, box1d) == pytest.approx(1.0)


@pytest.mark.parametrize("p", [0.5, 1.0, 2.0, 3.0])
def test_lorentz_diagonal_equals_lebesgue(box1d, rng, p):
    f = GridFn(box=box1d, values=rng.normal(size=box1d.shape))
    w = power_weight(0.5, box1d)
    assert lorentz_quasinorm(f, p, p, w) == pytest.approx(lp_norm(f, p, w), rel=1e-10)


def test_weak_quasinorm_matches_bruteforce(box1d, rng):
    f = GridFn(box=box1d, values=rng.normal(size=box1d.shape))
    w = power_weight(-0.5, box1d)
    expected = oracles.weak_quasinorm(f.values, w.values, box1d.cell_volume, 1.5)
    assert lorentz_quasinorm(f, 1.5, WEAK, w) == pytest.approx(expected, rel=1e-12)


def test_weak_is_below_strong(box1d, rng):
    f = GridFn(box=box1d, values=rng.normal(size=box1d.shape))
    assert lorentz_quasinorm(f, 1.0, WEAK) <= lp_norm(f, 1.0) * (1 + 1e-12)


def test_lorentz_of_zero(box1d):
    assert lorentz_quasinorm(GridFn.zeros(box1d), 2.0, 1.0) == 0.0


def centred_box(half_width, cells):
    """Odd cell count so that the middle cell is centred at the origin."""
    box = Box(dim=1, half_width=half_width, cells_per_axis=cells)
    assert box.axis_centres[cells // 2] == pytest.approx(0.0, abs=1e-12)
    return box


@pytest.mark.parametrize(
    "profile, t, expected",
    [
        (lambda x: np.sqrt(np.abs(x)), 1.0, 2.0 / 3.0),
        (lambda x: ((x >= 0.0) & (x <= 1.0)).astype(float), 2.0, 0.25),
    ],
)
def test_ball_average_closed_forms(profile, t, expected):
    box = centred_box(4.0, 513)
    f = GridFn(box=box, values=profile(box.axis_centres))
    assert ball_average(f, (256,), t) == pytest.approx(expected, abs=5 * box.h)


def test_weighted_measure_of_unit_interval():
    box = Box(dim=1, half_width=1.0, cells_per_axis=200)
    assert weighted_measure(box.axis_centres >= 0.0, power_weight(0.5, box), box) == pytest.approx(2.0 / 3.0, abs=1e-3)


def test_two_level_step_function_lorentz():
    box = Box(dim=1, half_width=1.0, cells_per_axis=8)
    values = np.zeros(box.shape)
    values[:2] = 2.0
    values[2:6] = 1.0
    f = GridFn(box=box, values=values)
    # w(E1) = 0.5 and w(E2) = 1.0 under Lebesgue measure
    assert lorentz_quasinorm(f, 1.0, WEAK) == pytest.approx(1.5)
    assert lorentz_quasinorm(f, 1.0, 1.0) == pytest.approx(2.0)
    assert lorentz_quasinorm(f, 2.0, WEAK) == pytest.approx(max(2.0 * math.sqrt(0.5), math.sqrt(1.5)))


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("p, s", [(1.0, WEAK), (1.5, 1.0), (2.0, 3.0), (0.5, 2.0)])
def test_lorentz_is_invariant_under_joint_permutations(seed, p, s):
    rng = np.random.default_rng(seed)
    box = Box(dim=1, half_width=2.0, cells_per_axis=24)
    f = GridFn(box=box, values=rng.normal(size=box.shape))
    w = Weight(box=box, values=rng.uniform(0.5, 2.0, size=box.shape))
    order = rng.permutation(box.cells_per_axis)
    shuffled_f = GridFn(box=box, values=f.values[order])
    shuffled_w = Weight(box=box, values=w.values[order])
    assert lorentz_quasinorm(shuffled_f, p, s, shuffled_w) == pytest.approx(lorentz_quasinorm(f, p, s, w), rel=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_ball_average_is_monotone(seed):
    rng = np.random.default_rng(seed)
    box = Box(dim=1 + seed % 2, half_width=1.0, cells_per_axis=10)
    f = GridFn(box=box, values=rng.normal(size=box.shape))
    g = f.with_values(f.values + rng.uniform(0.0, 1.0, size=box.shape))
    for t in (0.2, 0.5, 1.0):
        assert np.all(ball_averages(f, t).values <= ball_averages(g, t).values + 1e-12)


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 4.0])
def test_lp_norm_triangle_inequality(seed, p):
    rng = np.random.default_rng(seed)
    box = Box(dim=1 + seed % 2, half_width=1.0, cells_per_axis=10)
    f = GridFn(box=box, values=rng.normal(size=box.shape))
    g = GridFn(box=box, values=rng.normal(size=box.shape))
    w = power_weight(0.5, box)
    assert lp_norm(f + g, p, w) <= (lp_norm(f, p, w) + lp_norm(g, p, w)) * (1 + 1e-12)
