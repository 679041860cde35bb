import math

import numpy as np
import pytest
from scipy.integrate import quad

from gdoe.errors import ValidationError
from gdoe.fields import density_map, extract_borders, gradient_map, lattice_points
from gdoe.grids import GridSpec, equal_mass_radii, make_grid


def test_square_grid_counts_and_placement():
    pts = make_grid(GridSpec(type="square", nx=3, ny=3))
    assert pts.shape == (9, 2)
    assert pts[0] == pytest.approx([1 / 6, 1 / 6])
    assert len(make_grid(GridSpec(type="square", nx=8, ny=8))) == 64


def test_polar_grid_counts():
    assert len(make_grid(GridSpec(type="polar", rings=2, angles=3))) == 7
    assert len(make_grid(GridSpec(type="polar", rings=0, angles=3))) == 1
    spec40 = GridSpec(type="polar", rings=5, angles=8, include_center=False)
    assert spec40.count == 40
    assert len(make_grid(spec40)) == 40


def test_double_square_count():
    pts = make_grid(GridSpec(type="double-square"))
    assert pts.shape == (8, 2)
    # two radii, four points each, 45 degrees apart
    radii = np.hypot(pts[:, 0], pts[:, 1])
    assert sorted(np.round(radii, 4).tolist()).count(0.9005) == 4


def test_explicit_grid():
    spec = GridSpec(type="explicit", points=((0.1, 0.2), (0.3, 0.4)))
    assert make_grid(spec).tolist() == [[0.1, 0.2], [0.3, 0.4]]


def test_square_rotation_90_degrees_permutes_points():
    base = make_grid(GridSpec(type="square", nx=4, ny=4))
    rotated = make_grid(GridSpec(type="square", nx=4, ny=4, rotation=math.pi / 2))
    a = {(round(x, 12), round(y, 12)) for x, y in base}
    b = {(round(x, 12), round(y, 12)) for x, y in rotated}
    assert a == b


def test_square_rotation_leaving_square_rejected():
    with pytest.raises(ValidationError, match="outside"):
        make_grid(GridSpec(type="square", nx=8, ny=8, rotation=math.pi / 4))


def test_polar_rotation_offsets_angles():
    spec = GridSpec(type="polar", rings=1, angles=4, rotation=math.pi / 8)
    pts = make_grid(spec)[1:]  # skip center
    angles = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2 * math.pi)
    expected = np.mod(math.pi / 8 + np.arange(4) * math.pi / 2, 2 * math.pi)
    assert np.allclose(np.sort(angles), np.sort(expected))


def test_grid_validation_errors():
    with pytest.raises(ValidationError):
        make_grid(GridSpec(type="square", nx=0))
    with pytest.raises(ValidationError):
        make_grid(GridSpec(type="double-square", inner_radius=-1.0))
    with pytest.raises(ValidationError):
        GridSpec(type="wedge")


def test_polar_radii_equal_probability_mass():
    # oracle: numeric integration of the Rayleigh density r exp(-r^2/2)
    for rings in (1, 2, 3, 5, 8):
        radii = equal_mass_radii(rings)
        assert np.all(np.diff(radii) > 0)
        edges = [0.0, *radii.tolist()]
        share = 1.0 / (rings + 1)
        for lo, hi in zip(edges, edges[1:]):
            mass, _ = quad(lambda r: r * math.exp(-0.5 * r * r), lo, hi)
            assert mass == pytest.approx(share, abs=1e-9)
        tail, _ = quad(lambda r: r * math.exp(-0.5 * r * r), radii[-1], 50.0)
        assert tail == pytest.approx(share, abs=1e-9)


def test_default_spaces():
    assert GridSpec(type="square").space == "uniformed"
    assert GridSpec(type="polar").space == "original"
    assert GridSpec(type="double-square").space == "original"


def test_gridspec_dict_round_trip():
    spec = GridSpec(type="polar", rings=5, angles=8, include_center=False,
                    rotation=0.3)
    again = GridSpec.from_dict(spec.to_dict())
    assert again == spec


# --- density maps ---------------------------------------------------------


def test_density_single_point_peaks_at_nearest_cell():
    fmap = density_map([(0.305, 0.715)], resolution=20)
    j, i = np.unravel_index(np.argmax(fmap.values), fmap.values.shape)
    xs, ys = fmap.cell_centers()
    assert xs[i] == pytest.approx(0.325, abs=0.051)
    assert ys[j] == pytest.approx(0.725, abs=0.051)


def test_density_integrates_to_one():
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 1, size=(200, 2))
    fmap = density_map(pts, resolution=50)
    assert fmap.values.min() >= 0.0
    integral = fmap.values.sum() / (50 * 50)
    assert integral == pytest.approx(1.0, abs=1e-6)


def test_density_uniform_points_nearly_flat():
    # sampling-noise envelope from direct simulation: uniform cloud stays flat
    rng = np.random.default_rng(123)
    pts = rng.uniform(0, 1, size=(10_000, 2))
    fmap = density_map(pts, resolution=20)
    assert fmap.values.max() / fmap.values.min() < 2.0


def test_density_deterministic():
    pts = np.random.default_rng(5).uniform(0, 1, size=(64, 2))
    a = density_map(pts, resolution=30)
    b = density_map(pts, resolution=30)
    assert np.array_equal(a.values, b.values)


def test_density_requires_points():
    with pytest.raises(ValidationError):
        density_map(np.empty((0, 2)))


# --- gradient maps --------------------------------------------------------


class _StubModel:
    """Stands in for a trained model: decode_rows is an explicit field."""

    def __init__(self, fn, column_map):
        self.fn = fn
        self.column_map = column_map
        self.factors = None

    def decode_rows(self, z):
        from gdoe.stats import normal_cdf

        u = normal_cdf(np.asarray(z))
        return self.fn(u)


def _single_factor_map():
    from gdoe.design import FactorSpec, column_map_for

    f = FactorSpec("t", "numeric-continuous", (0.0, 1.0))
    return column_map_for([f])


def test_gradient_constant_decoder_is_zero():
    cmap = _single_factor_map()
    model = _StubModel(lambda u: np.full((u.shape[0], 1), 0.4), cmap)
    fmap = gradient_map(model, resolution=10, aggregation="sum")
    assert np.allclose(fmap.values, 0.0)


def test_gradient_identity_field_is_one():
    cmap = _single_factor_map()
    model = _StubModel(lambda u: u[:, [0]], cmap)
    fmap = gradient_map(model, resolution=20, aggregation="sum")
    interior = fmap.values[1:-1, 1:-1]
    assert interior == pytest.approx(np.ones_like(interior), rel=1e-9)


def test_gradient_max_leq_sum():
    cmap = _single_factor_map()
    rng = np.random.default_rng(2)

    def wiggly(u):
        return (0.5 + 0.4 * np.sin(6 * u[:, [0]]) * np.cos(5 * u[:, [1]])).clip(0, 1)

    model = _StubModel(wiggly, cmap)
    s = gradient_map(model, resolution=15, aggregation="sum")
    m = gradient_map(model, resolution=15, aggregation="max")
    assert np.all(m.values <= s.values + 1e-12)


def test_gradient_resolution_validation():
    cmap = _single_factor_map()
    model = _StubModel(lambda u: u[:, [0]], cmap)
    with pytest.raises(ValidationError):
        gradient_map(model, resolution=2)
    with pytest.raises(ValidationError):
        gradient_map(model, resolution=10, aggregation="median")


def test_extract_borders_thresholds():
    from gdoe.fields import FieldMap

    values = np.array([[0.1, 0.6], [0.9, 0.2]])
    fmap = FieldMap(values=values, name="test")
    everything = extract_borders(fmap, 0.0)
    assert len(everything) == 4
    none = extract_borders(fmap, 1.5)
    assert none == []
    some = extract_borders(fmap, 0.5)
    assert {(b.j, b.i) for b in some} == {(0, 1), (1, 0)}
    assert all(b.value >= 0.5 for b in some)


def test_lattice_points_layout():
    pts = lattice_points(4, 2)
    assert pts.shape == (8, 2)
    assert pts[0] == pytest.approx([0.125, 0.25])
    assert pts[1] == pytest.approx([0.375, 0.25])  # x varies fastest
