import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circgpr.errors import GeometryError, ParameterError, SamplingError
from circgpr.scene import (BlobShape, GridSpec, Scene, SceneRanges, blob_radius,
                           boundary_points, defect_mask, image_window,
                           rasterize, sample_scene)


def brute_force_min_distance(pts: np.ndarray, shape: BlobShape, n: int = 4096) -> float:
    """Independent containment oracle: min distance from pts to a densely
    sampled outline polyline, no spatial index."""
    outline = boundary_points(shape, n)
    d = np.linalg.norm(pts[:, None, :] - outline[None, :, :], axis=2)
    return float(d.min())


# ---------------------------------------------------------------------------
# blob_radius
# ---------------------------------------------------------------------------

def test_blob_radius_circle():
    s = BlobShape(base_radius=0.2)
    assert blob_radius(s, 1.1) == pytest.approx(0.2)


def test_blob_radius_single_harmonic():
    s = BlobShape(base_radius=0.2, harmonics=((2, 0.1, 0.0),))
    assert blob_radius(s, 0.0) == pytest.approx(0.2 * 1.1)


@given(st.floats(-10.0, 10.0))
@settings(max_examples=50, deadline=None)
def test_blob_radius_periodic(theta):
    s = BlobShape(base_radius=0.25, harmonics=((2, 0.05, 0.3), (5, 0.08, 1.0)))
    assert blob_radius(s, theta) == pytest.approx(blob_radius(s, theta + 2 * np.pi))
    assert blob_radius(s, theta) > 0


def test_blob_amplitude_budget_enforced():
    with pytest.raises(ParameterError):
        BlobShape(base_radius=0.2, harmonics=((2, 0.2, 0.0), (3, 0.2, 0.0)))


# ---------------------------------------------------------------------------
# sample_scene
# ---------------------------------------------------------------------------

def test_sample_scene_deterministic():
    a = sample_scene(7)
    b = sample_scene(7)
    assert a == b
    assert a.to_dict() == b.to_dict()


def test_sample_scene_default_ranges():
    s = sample_scene(7)
    assert 4.0 <= s.layer_eps[2] <= 5.0
    assert 5.0 <= s.defect_eps <= 40.0


def test_sample_scene_parameters_within_ranges():
    ranges = SceneRanges()
    lo_eps, hi_eps = np.inf, -np.inf
    for seed in range(300):
        s = sample_scene(seed, ranges)
        assert ranges.object_radius[0] <= s.outer_shape.base_radius <= ranges.object_radius[1]
        assert ranges.t1[0] <= s.layer_thicknesses[0] <= ranges.t1[1]
        assert ranges.t2[0] <= s.layer_thicknesses[1] <= ranges.t2[1]
        for i, (elo, ehi) in enumerate([ranges.eps1, ranges.eps2, ranges.eps3]):
            assert elo <= s.layer_eps[i] <= ehi
        assert ranges.defect_eps[0] <= s.defect_eps <= ranges.defect_eps[1]
        lo_eps = min(lo_eps, s.defect_eps)
        hi_eps = max(hi_eps, s.defect_eps)
    # the sampler actually explores the configured range
    assert hi_eps - lo_eps > 0.5 * (ranges.defect_eps[1] - ranges.defect_eps[0])


def test_small_defect_always_fits():
    ranges = SceneRanges(object_radius=(0.33, 0.33), defect_radius=(0.04, 0.04))
    for seed in range(100):
        sample_scene(seed, ranges)  # must not raise


def test_defect_boundary_inside_layer3():
    # containment invariant, checked with the brute-force distance oracle
    for seed in (1, 12, 123):
        s = sample_scene(seed)
        pts = boundary_points(s.defect_shape, 360)
        depth = brute_force_min_distance(pts, s.outer_shape)
        t1, t2 = s.layer_thicknesses
        assert depth >= t1 + t2 + 0.01 - 1e-6


def test_sampling_failure_names_seed():
    # a defect that can never fit inside the innermost region
    ranges = SceneRanges(object_radius=(0.15, 0.15), t1=(0.02, 0.02),
                         t2=(0.03, 0.03), clearance=0.12)
    with pytest.raises(SamplingError, match="seed 5"):
        sample_scene(5, ranges)


# ---------------------------------------------------------------------------
# rasterize
# ---------------------------------------------------------------------------

def circular_scene(r=0.2, t1=0.015, t2=0.02, defect_center=(0.05, 0.0),
                   defect_r=0.04) -> Scene:
    return Scene(
        outer_shape=BlobShape(base_radius=r),
        layer_thicknesses=(t1, t2),
        layer_eps=(2.5, 24.0, 4.5),
        layer_sigma=(0.02, 0.2, 0.02),
        defect_shape=BlobShape(base_radius=defect_r, center=defect_center),
        defect_eps=20.0,
        defect_sigma=0.02,
        seed=0,
    )


def grid_for(scene: Scene, spacing=2e-3, pad=0.02) -> GridSpec:
    half = scene.outer_shape.max_radius + pad
    n = int(np.ceil(2 * half / spacing)) + 1
    return GridSpec(origin=(-half, -half), spacing=spacing, nx=n, ny=n)


def test_rasterize_defect_and_background():
    scene = circular_scene()
    spec = grid_for(scene)
    grid = rasterize(scene, spec)
    ix = round((0.05 - spec.origin[0]) / spec.spacing)
    iy = round((0.0 - spec.origin[1]) / spec.spacing)
    assert grid.eps_r[ix, iy] == pytest.approx(scene.defect_eps)
    assert grid.sigma[ix, iy] == pytest.approx(scene.defect_sigma)
    assert grid.eps_r[0, 0] == 1.0
    assert grid.sigma[0, 0] == 0.0


def test_rasterize_radial_layer_classification():
    # analytic oracle for a circle: material by radial distance from r=0.2
    scene = circular_scene(r=0.2, t1=0.015)
    spec = grid_for(scene, spacing=1e-3)
    grid = rasterize(scene, spec)
    # a cell at radius 0.193: depth 0.007 < t1 -> layer 1
    ix = round((0.193 - spec.origin[0]) / spec.spacing)
    iy = round((0.0 - spec.origin[1]) / spec.spacing)
    assert grid.eps_r[ix, iy] == pytest.approx(scene.layer_eps[0])
    # radius 0.17: depth 0.03 in (t1, t1+t2) -> layer 2
    ix = round((0.17 - spec.origin[0]) / spec.spacing)
    assert grid.eps_r[ix, iy] == pytest.approx(scene.layer_eps[1])
    # radius 0.10: depth 0.10 > t1+t2 -> layer 3
    ix = round((0.10 - spec.origin[0]) / spec.spacing)
    assert grid.eps_r[ix, iy] == pytest.approx(scene.layer_eps[2])


def test_rasterize_window_too_small():
    scene = circular_scene()
    spec = GridSpec(origin=(-0.1, -0.1), spacing=2e-3, nx=100, ny=100)
    with pytest.raises(GeometryError):
        rasterize(scene, spec)


# ---------------------------------------------------------------------------
# defect_mask
# ---------------------------------------------------------------------------

def test_defect_mask_full_and_empty():
    scene = circular_scene(defect_center=(0.0, 0.0), defect_r=0.04)
    inside = GridSpec(origin=(-0.01, -0.01), spacing=2e-4, nx=101, ny=101)
    assert defect_mask(scene, inside).min() == 1.0
    outside = GridSpec(origin=(0.3, 0.3), spacing=1e-3, nx=64, ny=64)
    assert defect_mask(scene, outside).max() == 0.0


def test_defect_mask_area_matches_circle():
    scene = circular_scene(r=0.33, defect_center=(0.0, 0.0), defect_r=0.05)
    spec = GridSpec(origin=(-0.35, -0.35), spacing=0.70 / 127, nx=128, ny=128)
    mask = defect_mask(scene, spec)
    area = mask.sum() * spec.spacing**2
    assert area == pytest.approx(np.pi * 0.05**2, rel=0.03)


def test_defect_area_converges_with_refinement():
    scene = circular_scene(r=0.33, defect_center=(0.0, 0.0), defect_r=0.05)
    truth = np.pi * 0.05**2
    errors = []
    for n in (64, 128, 256):
        spec = GridSpec(origin=(-0.35, -0.35), spacing=0.70 / (n - 1), nx=n, ny=n)
        area = defect_mask(scene, spec).sum() * spec.spacing**2
        errors.append(abs(area - truth))
    assert errors[0] > errors[1] > errors[2]


def test_rasterized_defect_area_converges():
    scene = circular_scene(r=0.2, defect_center=(0.05, 0.0), defect_r=0.04)
    truth = np.pi * 0.04**2
    errors = []
    for spacing in (4e-3, 2e-3, 1e-3):
        spec = grid_for(scene, spacing=spacing)
        grid = rasterize(scene, spec)
        area = np.sum(grid.eps_r == scene.defect_eps) * spacing**2
        errors.append(abs(area - truth))
    assert errors[0] > errors[1] > errors[2]


def test_image_window_covers_outline():
    scene = sample_scene(3)
    spec = image_window(scene, 128)
    assert spec.nx == spec.ny == 128
    half = scene.outer_shape.max_radius
    assert spec.origin[0] <= scene.outer_shape.center[0] - half
    assert spec.origin[0] + spec.spacing * 127 >= scene.outer_shape.center[0] + half
