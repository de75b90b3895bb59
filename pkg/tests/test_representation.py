import numpy as np
import pytest

from conftest import random_scene
from domescan import uniform_dome
from domescan.errors import (BadMagic, DimOverflow, MissingPoints,
                             TruncatedFile)
from domescan.ingest import LidarScan
from domescan.projection import project
from domescan.representation import (ALL_CHANNELS, BASE_CHANNELS,
                                     FrameRepresentation,
                                     RepresentationConfig,
                                     build_representation,
                                     read_representation, read_tensors,
                                     resize, write_representation,
                                     write_tensors)
from domescan.synth import render


def make_scan(intr, range_mm=1500, signal=512, refl=128, nir=256):
    h, w = intr.shape
    return LidarScan(
        frame_id=3, intrinsics=intr,
        range_mm=np.full((h, w), range_mm, dtype=np.uint32),
        signal=np.full((h, w), signal, dtype=np.uint16),
        reflectivity=np.full((h, w), refl, dtype=np.uint16),
        nir=np.full((h, w), nir, dtype=np.uint16),
        valid=np.ones((h, w), dtype=bool),
    )


@pytest.fixture(scope="module")
def intr():
    return uniform_dome(16, 64)


class TestBuild:
    def test_reversed_range_near_object(self, intr):
        scan = make_scan(intr, range_mm=1500)
        rep = build_representation(scan)
        assert rep.channel("revrange")[0, 0] == pytest.approx(0.9)

    def test_invalid_pixel_all_zero(self, intr):
        scan = make_scan(intr)
        scan.valid[2, 5] = False
        rep = build_representation(scan)
        assert np.all(rep.channels[:, 2, 5] == 0.0)

    def test_far_object_transparent(self, intr):
        scan = make_scan(intr, range_mm=20_000)
        rep = build_representation(scan)
        assert np.all(rep.channel("revrange") == 0.0)

    def test_channel_order_and_normalization(self, intr):
        scan = make_scan(intr, range_mm=7500, signal=512, refl=102, nir=256)
        rep = build_representation(scan)
        assert rep.channel_names == BASE_CHANNELS
        np.testing.assert_allclose(
            rep.channels[:, 0, 0], [256 / 1024, 102 / 255, 512 / 1024, 0.5],
            atol=1e-6)

    def test_seven_channel_needs_points(self, intr):
        scan = make_scan(intr)
        with pytest.raises(MissingPoints):
            build_representation(scan, None,
                                 RepresentationConfig.seven_channel())

    def test_seven_channel_shape_and_bounds(self, intr):
        scan = make_scan(intr)
        points = project(scan, intr, "standard")
        rep = build_representation(scan, points,
                                   RepresentationConfig.seven_channel())
        assert rep.channels.shape == (7, 16, 64)
        assert rep.channel_names == ALL_CHANNELS
        assert rep.channels.min() >= -1.0 and rep.channels.max() <= 1.0
        assert rep.channels[:4].min() >= 0.0

    def test_reversed_range_monotone(self, intr):
        reps = [build_representation(make_scan(intr, range_mm=r))
                for r in (500, 3000, 9000, 14_999)]
        values = [r.channel("revrange")[0, 0] for r in reps]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_manifest_reproduces_bitwise(self, intr64):
        rng = np.random.default_rng(0)
        scan, _, _ = render(random_scene(rng), intr64)
        points = project(scan, intr64, "standard")
        rep1 = build_representation(scan, points,
                                    RepresentationConfig.seven_channel())
        config = RepresentationConfig(
            channels=tuple(rep1.manifest["channels"]),
            nir_divisor=rep1.manifest["nir_divisor"],
            signal_divisor=rep1.manifest["signal_divisor"],
            reflectivity_divisor=rep1.manifest["reflectivity_divisor"],
            range_max_mm=rep1.manifest["range_max_mm"],
            position_scale_m=rep1.manifest["position_scale_m"])
        rep2 = build_representation(scan, points, config)
        assert np.array_equal(rep1.channels, rep2.channels)


class TestResize:
    def test_128_to_64_rows(self, intr128):
        rng = np.random.default_rng(1)
        scan, _, _ = render(random_scene(rng), intr128)
        rep = build_representation(scan)
        small = resize(rep, (64, 512))
        assert small.channels.shape == (4, 64, 512)
        assert small.manifest["resized_to"] == [64, 512]

    def test_identity_resize_bitwise(self, intr):
        rep = build_representation(make_scan(intr))
        same = resize(rep, (16, 64))
        assert np.array_equal(same.channels, rep.channels)

    def test_constant_channel_stays_constant(self, intr):
        rep = build_representation(make_scan(intr, range_mm=7500))
        out = resize(rep, (10, 100))
        for c in range(4):
            assert np.allclose(out.channels[c], rep.channels[c][0, 0],
                               atol=1e-6)

    def test_conservative_validity(self, intr):
        scan = make_scan(intr, range_mm=1500)
        scan.valid[:, 32:] = False
        rep = build_representation(scan)
        half = resize(rep, (16, 32))
        rev = half.channel("revrange")
        # right half maps to invalid sources only
        assert np.all(rev[:, 16:] == 0.0)
        # the seam column touches invalid neighbors and must not fabricate
        assert np.all(rev[:, :15] == pytest.approx(0.9))


class TestContainer:
    def test_tensor_roundtrip(self, tmp_path):
        rng = np.random.default_rng(2)
        arrays = [rng.random((7, 64, 512)).astype(np.float32),
                  rng.integers(0, 2**32, (64, 512), dtype=np.uint32),
                  rng.integers(0, 2, (64, 512)).astype(np.uint8)]
        path = tmp_path / "t.ldt"
        write_tensors(path, arrays)
        again = read_tensors(path)
        assert len(again) == 3
        for a, b in zip(arrays, again):
            assert a.dtype == b.dtype
            assert np.array_equal(a, b)

    def test_payload_size_7x64x512(self, tmp_path):
        path = tmp_path / "t.ldt"
        write_tensors(path, [np.zeros((7, 64, 512), dtype=np.float32)])
        size = path.stat().st_size
        assert 7 * 64 * 512 * 4 == 917_504
        assert size == 8 + 4 * 3 + 917_504

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "t.ldt"
        write_tensors(path, [np.zeros((4, 8), dtype=np.float32)])
        data = path.read_bytes()
        path.write_bytes(data[:-5])
        with pytest.raises(TruncatedFile):
            read_tensors(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "t.ldt"
        path.write_bytes(b"NOPE" + bytes(20))
        with pytest.raises(BadMagic):
            read_tensors(path)

    def test_dim_overflow(self, tmp_path):
        path = tmp_path / "t.ldt"
        with pytest.raises(DimOverflow):
            write_tensors(path, [np.zeros((1,) * 9, dtype=np.float32)])

    def test_representation_roundtrip(self, tmp_path, intr64):
        rng = np.random.default_rng(3)
        scan, _, _ = render(random_scene(rng), intr64)
        points = project(scan, intr64, "standard")
        rep = build_representation(scan, points,
                                   RepresentationConfig.seven_channel())
        path = tmp_path / "rep.ldt"
        write_representation(rep, path)
        again = read_representation(path)
        assert again == rep
