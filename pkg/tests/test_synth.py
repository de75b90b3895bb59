import json

import numpy as np
import pytest

from conftest import random_scene
from domescan import uniform_dome
from domescan.ingest import assemble_file
from domescan.projection import project, ray_geometry
from domescan.synth import (Background, Box, Cylinder, Emission, Scene,
                            Sphere, load_scene, make_stream, render)


def test_unit_sphere_mask_and_range_bounds(intr64):
    scene = Scene(primitives=[Sphere((3.0, 0.0, 0.5), 0.5, label="person")])
    scan, ann, truth = render(scene, intr64)
    assert len(ann.instances) == 1
    mask = ann.instances[0].mask(64, 512)
    assert mask.sum() > 0
    center_dist = np.sqrt(3.0 ** 2 + 0.5 ** 2)
    hit = scan.range_mm[mask] / 1000.0
    assert hit.min() >= center_dist - 0.5 - 1e-3
    assert hit.max() <= center_dist + 0.5 + 1e-3
    # mask forms one contiguous blob: its bounding box is mostly filled
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    assert rows.size >= 1 and cols.size >= 1


def test_empty_scene_all_invalid(intr64):
    scan, ann, truth = render(Scene(), intr64)
    assert scan.completeness == 1.0
    assert scan.valid.sum() == 0
    assert len(ann.instances) == 0
    assert np.all(truth.xyz == 0.0)


def test_roundtrip_oracle_all_primitive_kinds(intr64):
    scene = Scene(primitives=[
        Sphere((2.5, 1.0, 1.0), 0.4, label="person"),
        Box((-2.0, 1.5, 0.8), (0.8, 0.8, 1.2), label="person"),
        Cylinder((0.5, -3.0), (0.2, 1.9), 0.3, label="person"),
    ], background=Background(ground_z=-0.2, wall_radius=7.0))
    scan, ann, truth = render(scene, intr64)
    assert len(ann.instances) == 3
    points = project(scan, intr64, "standard")
    err = np.linalg.norm(points.xyz - truth.xyz, axis=-1)[scan.valid]
    assert err.max() < 2e-3


def test_paper_mode_self_consistent(intr64):
    scene = Scene(primitives=[Sphere((3.0, 1.0, 1.0), 0.5, label="person")],
                  background=Background(dome_radius=8.0))
    scan, _, truth = render(scene, intr64, mode="paper")
    points = project(scan, intr64, "paper")
    err = np.linalg.norm(points.xyz - truth.xyz, axis=-1)[scan.valid]
    assert err.max() < 2e-3


def test_quantization_error_bounded(intr64):
    coarse = uniform_dome(64, 512, range_unit_mm=4.0)
    scene = Scene(primitives=[Sphere((3.0, 0.0, 1.0), 0.5, label="person")],
                  background=Background(dome_radius=8.0))
    scan, _, truth = render(scene, coarse)
    points = project(scan, coarse, "standard")
    err = np.linalg.norm(points.xyz - truth.xyz, axis=-1)[scan.valid]
    assert err.max() <= 4.0e-3 / 2 + 1e-6


def test_rotation_consistency_shifts_columns(intr64):
    w = intr64.scan_width
    k = 37
    angle = -k * 2 * np.pi / w  # encoder angle decreases with column index
    c, s = np.cos(angle), np.sin(angle)
    center = np.array([3.0, 1.0, 1.0])
    rotated = np.array([c * center[0] - s * center[1],
                        s * center[0] + c * center[1], center[2]])
    scan_a, _, _ = render(Scene(primitives=[
        Sphere(tuple(center), 0.5, label="person")]), intr64)
    scan_b, _, _ = render(Scene(primitives=[
        Sphere(tuple(rotated), 0.5, label="person")]), intr64)
    assert np.array_equal(np.roll(scan_a.range_mm, k, axis=1),
                          scan_b.range_mm)


def test_mirrored_scene_geometry(intr64):
    """Reflecting the world about the x-z plane maps column j to (w - j) % w
    and negates y, for azimuth-offset-free intrinsics."""
    scene = Scene(primitives=[Sphere((2.5, 1.5, 1.0), 0.5, label="person")],
                  background=Background(dome_radius=8.0))
    _, _, truth = render(scene, intr64)
    _, _, truth_m = render(scene.mirrored_y(), intr64)
    w = intr64.scan_width
    cols = (w - np.arange(w)) % w
    np.testing.assert_allclose(truth_m.xyz[:, cols, 0], truth.xyz[:, :, 0],
                               atol=1e-9)
    np.testing.assert_allclose(truth_m.xyz[:, cols, 1], -truth.xyz[:, :, 1],
                               atol=1e-9)
    np.testing.assert_allclose(truth_m.xyz[:, cols, 2], truth.xyz[:, :, 2],
                               atol=1e-9)


def test_make_stream_pipeline_identity(tmp_path, intr64_shifted):
    rng = np.random.default_rng(8)
    scenes = [random_scene(rng) for _ in range(3)]
    path = tmp_path / "s.bin"
    make_stream(scenes, intr64_shifted, path)
    scans = list(assemble_file(path, intr64_shifted))
    rendered = [render(scene, intr64_shifted, frame_id=k)[0]
                for k, scene in enumerate(scenes)]
    assert scans == rendered


def test_noise_flag_perturbs_ranges(intr64):
    scene = Scene(primitives=[Sphere((3.0, 0.0, 1.0), 0.5, label="person")],
                  background=Background(dome_radius=8.0))
    clean, _, _ = render(scene, intr64)
    noisy, _, _ = render(scene, intr64, noise_std_mm=20.0,
                         rng=np.random.default_rng(1))
    assert not np.array_equal(clean.range_mm, noisy.range_mm)
    assert np.array_equal(clean.valid, noisy.valid)


def test_scene_file_loading(tmp_path, intr64):
    doc = {
        "primitives": [
            {"type": "sphere", "center": [3, 0, 1], "radius": 0.5,
             "label": "person", "signal": 500},
            {"type": "box", "center": [-2, 1, 0.5], "size": [1, 1, 1]},
            {"type": "cylinder", "center": [0, -3], "z_range": [0, 1.8],
             "radius": 0.3, "label": "walking"},
        ],
        "background": {"dome_radius": 9.0, "nir": 111},
    }
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(doc))
    scene = load_scene(path)
    assert len(scene.primitives) == 3
    assert scene.primitives[0].emission.signal == 500
    assert scene.primitives[1].label is None
    assert scene.background.dome_radius == 9.0
    assert scene.background.emission.nir == 111
    scan, ann, _ = render(scene, intr64)
    assert scan.valid.all()
    labels = sorted(i.label for i in ann.instances)
    assert labels == ["person", "walking"]
