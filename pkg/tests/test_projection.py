import math

import numpy as np
import pytest

from conftest import random_scene
from domescan import uniform_dome
from domescan.errors import DimensionMismatch, IndexOutOfRange
from domescan.projection import (angles, positional_channels, project,
                                 ray_geometry)
from domescan.synth import Background, Scene, Sphere, render


def single_beam(altitude_deg, azimuth_deg=0.0, w=512, **overrides):
    return uniform_dome(1, w, beam_altitude_deg=(altitude_deg,),
                        beam_azimuth_deg=(azimuth_deg,),
                        pixel_shift_by_row=(0,), **overrides)


class TestAngles:
    def test_encoder_angle_at_zero(self):
        intr = single_beam(45.0)
        th_enc, _, _ = angles(0, 0, intr)
        assert th_enc == 2 * math.pi

    def test_encoder_angle_quarter_turn(self):
        intr = single_beam(45.0)
        th_enc, _, _ = angles(128, 0, intr)
        assert th_enc == pytest.approx(3 * math.pi / 2, abs=1e-15)

    def test_encoder_angle_closed_endpoint(self):
        intr = single_beam(45.0)
        th_enc, _, _ = angles(512, 0, intr)
        assert th_enc == 0.0

    def test_azimuth_and_altitude_substitution(self):
        intr = single_beam(45.0, azimuth_deg=90.0)
        _, th_azi, phi = angles(0, 0, intr)
        assert th_azi == pytest.approx(-math.pi / 2, abs=1e-15)
        assert phi == pytest.approx(math.pi / 4, abs=1e-15)

    def test_encoder_angle_strictly_decreasing(self):
        intr = single_beam(45.0)
        values = [angles(i, 0, intr)[0] for i in range(0, 513, 16)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_out_of_range_indices(self):
        intr = single_beam(45.0)
        with pytest.raises(IndexOutOfRange):
            angles(513, 0, intr)
        with pytest.raises(IndexOutOfRange):
            angles(-1, 0, intr)
        with pytest.raises(IndexOutOfRange):
            angles(0, 1, intr)


def scan_with_constant_range(intr, range_mm):
    from domescan.ingest import LidarScan
    h, w = intr.shape
    return LidarScan(
        frame_id=0, intrinsics=intr,
        range_mm=np.full((h, w), range_mm, dtype=np.uint32),
        signal=np.zeros((h, w), dtype=np.uint16),
        reflectivity=np.zeros((h, w), dtype=np.uint16),
        nir=np.zeros((h, w), dtype=np.uint16),
        valid=np.ones((h, w), dtype=bool),
    )


class TestProject:
    def test_horizon_beam_lands_on_x_axis(self):
        # th_enc = 2*pi at i = 0 collapses all trig terms
        intr = single_beam(0.0)
        scan = scan_with_constant_range(intr, 2000)
        points = project(scan, intr, "standard")
        np.testing.assert_allclose(points.xyz[0, 0], [2.0, 0.0, 0.0],
                                   atol=1e-9)

    def test_zenith_beam_is_pure_z(self):
        intr = single_beam(90.0)
        scan = scan_with_constant_range(intr, 3000)
        points = project(scan, intr, "standard")
        assert points.xyz[0, :, 2] == pytest.approx(3.0, abs=1e-9)
        planar = points.xyz[0, :, 0] ** 2 + points.xyz[0, :, 1] ** 2
        np.testing.assert_allclose(planar, 0.0, atol=1e-12)

    def test_radius_equals_range_without_offsets(self):
        intr = uniform_dome(32, 256)
        scan = scan_with_constant_range(intr, 4321)
        points = project(scan, intr, "standard")
        radius = np.linalg.norm(points.xyz, axis=-1)
        np.testing.assert_allclose(radius, 4.321, rtol=1e-6)

    def test_paper_mode_breaks_radius_standard_keeps_it(self):
        intr = uniform_dome(32, 256)
        scan = scan_with_constant_range(intr, 4000)
        std = np.linalg.norm(project(scan, intr, "standard").xyz, axis=-1)
        pap = np.linalg.norm(project(scan, intr, "paper").xyz, axis=-1)
        np.testing.assert_allclose(std, 4.0, rtol=1e-6)
        assert np.abs(pap - 4.0).max() > 0.5

    def test_radius_bounded_by_optics_offset(self):
        intr = uniform_dome(32, 256, origin_to_optics_x_mm=15.806,
                            origin_to_optics_z_mm=3.0)
        n = math.hypot(15.806, 3.0) / 1000.0
        scan = scan_with_constant_range(intr, 5000)
        points = project(scan, intr, "standard")
        radius = np.linalg.norm(points.xyz, axis=-1)
        assert np.all(radius >= 5.0 - n - 1e-3)
        assert np.all(radius <= 5.0 + n + 1e-3)

    def test_invalid_pixels_at_origin(self):
        intr = uniform_dome(16, 64)
        scan = scan_with_constant_range(intr, 2500)
        scan.valid[3, 7] = False
        points = project(scan, intr, "standard")
        assert np.all(points.xyz[3, 7] == 0.0)

    def test_neighbor_spacing_shrinks_toward_zenith(self):
        # beams near the rotation axis sit closer together per column step
        for beta_lo, beta_hi in [(10.0, 80.0)]:
            d = {}
            for beta in (beta_lo, beta_hi):
                intr = single_beam(beta)
                scan = scan_with_constant_range(intr, 3000)
                xyz = project(scan, intr, "standard").xyz[0]
                d[beta] = np.linalg.norm(xyz[1] - xyz[0])
            assert d[beta_hi] < d[beta_lo]
            bound = 3.0 * 2 * math.pi / 512 * (1 + 1e-9)
            assert d[beta_lo] <= bound
            assert d[beta_hi] <= bound

    def test_dimension_mismatch(self):
        intr = uniform_dome(16, 64)
        scan = scan_with_constant_range(uniform_dome(16, 128), 1000)
        with pytest.raises(DimensionMismatch):
            project(scan, intr, "standard")

    def test_deterministic_bitwise(self):
        intr = uniform_dome(32, 256, origin_to_optics_x_mm=12.0)
        scan = scan_with_constant_range(intr, 3777)
        a = project(scan, intr, "standard").xyz
        b = project(scan, intr, "standard").xyz
        assert np.array_equal(a, b)

    def test_destagger_aware_projection(self, intr64_shifted):
        # per-row pixel shifts change which measurement id a destaggered
        # column holds; the projection must track that bookkeeping
        scene = Scene(primitives=[Sphere((3, 1, 1), 0.6, label="person")],
                      background=Background(dome_radius=8.0))
        scan, _, truth = render(scene, intr64_shifted)
        points = project(scan, intr64_shifted, "standard")
        err = np.linalg.norm(points.xyz - truth.xyz, axis=-1)[scan.valid]
        assert err.max() < 2e-3


class TestPositionalChannels:
    def test_linear_map(self):
        intr = single_beam(0.0, w=16)
        scan = scan_with_constant_range(intr, 1000)
        points = project(scan, intr, "standard")
        points.xyz[0, 0] = [5.0, -5.0, 2.5]
        planes = positional_channels(points, scale_m=10.0)
        np.testing.assert_allclose(planes[:, 0, 0], [0.5, -0.5, 0.25],
                                   atol=1e-7)

    def test_invalid_pixel_zero(self):
        intr = single_beam(0.0, w=16)
        scan = scan_with_constant_range(intr, 1000)
        scan.valid[0, 5] = False
        points = project(scan, intr, "standard")
        planes = positional_channels(points)
        assert np.all(planes[:, 0, 5] == 0.0)

    def test_output_bounded(self):
        rng = np.random.default_rng(3)
        intr = uniform_dome(16, 64)
        scan = scan_with_constant_range(intr, 1)
        scan.range_mm[:] = rng.integers(1, 30_000, scan.range_mm.shape)
        planes = positional_channels(project(scan, intr, "standard"),
                                     scale_m=2.0)
        assert planes.min() >= -1.0 and planes.max() <= 1.0


def test_ray_geometry_cached(intr64):
    a = ray_geometry(intr64, "standard")
    b = ray_geometry(intr64, "standard")
    assert a[0] is b[0]


def test_synthetic_roundtrip_oracle(intr64):
    rng = np.random.default_rng(42)
    for _ in range(5):
        scene = random_scene(rng)
        scan, _, truth = render(scene, intr64)
        points = project(scan, intr64, "standard")
        err = np.linalg.norm(points.xyz - truth.xyz, axis=-1)[scan.valid]
        assert err.max() < 2e-3
