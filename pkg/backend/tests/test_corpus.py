import numpy as np

from app.corpus import Domain, carleson_box, full_box, random_halfspace_shapes, random_shapes, t_slab
from app.schemas import ResolutionStep


def test_default_domains():
    one, two = Domain.default(1), Domain.default(2)
    assert (one.half_width, one.t_min, one.t_max) == (4.0, 0.125, 2.0)
    assert (two.half_width, two.t_min, two.t_max) == (2.0, 0.25, 1.0)
    box, tlevels = one.grids(ResolutionStep(cells=64, levels=8))
    assert box.cells_per_axis == 64 and tlevels.count == 8


def test_random_shapes_are_seeded():
    domain = Domain.default(1)
    assert random_shapes(7, domain, 4) == random_shapes(7, domain, 4)
    assert random_shapes(7, domain, 4) != random_shapes(8, domain, 4)
    assert random_shapes(7, domain, 4, stream=1) != random_shapes(7, domain, 4)


def test_shapes_sample_consistently_across_resolutions():
    domain = Domain.default(1)
    shape = random_shapes(3, domain, 1, kinds=("bump",))[0]
    coarse = shape.sample(domain.box(64)).values
    fine = shape.sample(domain.box(128)).values
    # the fine pair means of a smooth bump track the coarse samples
    np.testing.assert_allclose(fine.reshape(64, 2).mean(axis=1), coarse, atol=0.1)


def test_full_box_covers_everything():
    domain = Domain.default(2)
    np.testing.assert_array_equal(full_box(domain).sample(domain.box(16)).values, 1.0)


def test_t_slab_selects_levels():
    domain = Domain.default(1)
    box, tlevels = domain.box(32), domain.tlevels(8)
    F = t_slab(domain, 0.5, 1.0).sample(box, tlevels)
    inside = (tlevels.levels >= 0.5) & (tlevels.levels < 1.0)
    for k in range(tlevels.count):
        assert np.all(F.values[k] == (1.0 if inside[k] else 0.0))


def test_carleson_box_stays_away_from_the_boundary():
    domain = Domain.default(1)
    box, tlevels = domain.box(64), domain.tlevels(16)
    F = carleson_box((0.0,), 1.0).sample(box, tlevels)
    low = tlevels.levels < 0.25
    assert np.all(F.values[low] == 0.0)
    assert np.any(F.values[~low] > 0.0)
    assert np.all(F.values[tlevels.levels >= 1.0] == 0.0)


def test_random_halfspace_shapes_are_non_trivial():
    domain = Domain.default(1)
    box, tlevels = domain.box(64), domain.tlevels(8)
    shapes = random_halfspace_shapes(11, domain, 6)
    assert len(shapes) == 6
    for shape in shapes:
        assert np.any(shape.sample(box, tlevels).values != 0.0)
