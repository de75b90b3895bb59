"""Synthetic hemisphere scans with exact ground truth.

Rays are cast per pixel along the same mode-selected geometry the projection
uses (pixel coordinate is origin + range * direction), so rendering and
projection are exact inverses per mode, up to the millimeter quantization
applied at render time to mimic the sensor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import AnnotationSet, Instance, rle_encode
from .ingest import LidarScan, scan_to_packets
from .intrinsics import SensorIntrinsics
from .projection import PointImage, ray_geometry
from .wire import encode_packet

_EPS = 1e-9


@dataclass
class Emission:
    """Per-primitive channel constants written wherever the primitive is hit."""

    signal: int = 400
    reflectivity: int = 120
    nir: int = 200


@dataclass
class Sphere:
    center: tuple[float, float, float]
    radius: float
    label: str | None = None
    emission: Emission = field(default_factory=Emission)

    def intersect(self, o, d):
        oc = o - np.asarray(self.center)
        a = np.sum(d * d, axis=-1)
        b = 2.0 * np.sum(d * oc, axis=-1)
        c = np.sum(oc * oc, axis=-1) - self.radius ** 2
        return _smallest_positive_root(a, b, c)


@dataclass
class Box:
    """Axis-aligned box given by center and full size."""

    center: tuple[float, float, float]
    size: tuple[float, float, float]
    label: str | None = None
    emission: Emission = field(default_factory=Emission)

    def intersect(self, o, d):
        lo = np.asarray(self.center) - np.asarray(self.size) / 2.0
        hi = np.asarray(self.center) + np.asarray(self.size) / 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo - o) / d
            t2 = (hi - o) / d
        t1 = np.nan_to_num(t1, nan=-np.inf, posinf=np.inf, neginf=-np.inf)
        t2 = np.nan_to_num(t2, nan=np.inf, posinf=np.inf, neginf=-np.inf)
        tnear = np.max(np.minimum(t1, t2), axis=-1)
        tfar = np.min(np.maximum(t1, t2), axis=-1)
        hit = (tnear <= tfar) & (tfar > _EPS)
        r = np.where(tnear > _EPS, tnear, tfar)
        return np.where(hit, r, np.inf)


@dataclass
class Cylinder:
    """Vertical capped cylinder, the person-like primitive."""

    center: tuple[float, float]      # (x, y) of the axis
    z_range: tuple[float, float]
    radius: float
    label: str | None = None
    emission: Emission = field(default_factory=Emission)

    def intersect(self, o, d):
        cx, cy = self.center
        z0, z1 = min(self.z_range), max(self.z_range)
        ox, oy, oz = o[..., 0], o[..., 1], o[..., 2]
        dx, dy, dz = d[..., 0], d[..., 1], d[..., 2]

        a = dx * dx + dy * dy
        b = 2.0 * ((ox - cx) * dx + (oy - cy) * dy)
        c = (ox - cx) ** 2 + (oy - cy) ** 2 - self.radius ** 2
        best = np.full(a.shape, np.inf)
        for root in _quadratic_roots(a, b, c):
            z = oz + root * dz
            ok = np.isfinite(root) & (root > _EPS) & (z >= z0) & (z <= z1)
            best = np.where(ok & (root < best), root, best)
        # caps
        for zc in (z0, z1):
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (zc - oz) / dz
            x = ox + t * dx - cx
            y = oy + t * dy - cy
            ok = np.isfinite(t) & (t > _EPS) \
                & (x * x + y * y <= self.radius ** 2)
            best = np.where(ok & (t < best), t, best)
        return best


@dataclass
class Background:
    """Unlabeled enclosing geometry so scenes can fill the whole image."""

    ground_z: float | None = None
    wall_radius: float | None = None
    dome_radius: float | None = None
    emission: Emission = field(default_factory=lambda: Emission(
        signal=150, reflectivity=60, nir=350))

    def intersect(self, o, d):
        best = np.full(o.shape[:-1], np.inf)
        if self.ground_z is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (self.ground_z - o[..., 2]) / d[..., 2]
            ok = np.isfinite(t) & (t > _EPS)
            best = np.where(ok & (t < best), t, best)
        if self.wall_radius is not None:
            a = d[..., 0] ** 2 + d[..., 1] ** 2
            b = 2.0 * (o[..., 0] * d[..., 0] + o[..., 1] * d[..., 1])
            c = o[..., 0] ** 2 + o[..., 1] ** 2 - self.wall_radius ** 2
            for root in _quadratic_roots(a, b, c):
                ok = np.isfinite(root) & (root > _EPS)
                best = np.where(ok & (root < best), root, best)
        if self.dome_radius is not None:
            a = np.sum(d * d, axis=-1)
            b = 2.0 * np.sum(o * d, axis=-1)
            c = np.sum(o * o, axis=-1) - self.dome_radius ** 2
            for root in _quadratic_roots(a, b, c):
                ok = np.isfinite(root) & (root > _EPS)
                best = np.where(ok & (root < best), root, best)
        return best


@dataclass
class Scene:
    primitives: list = field(default_factory=list)
    background: Background | None = None

    def mirrored_y(self) -> "Scene":
        """The scene reflected about the sensor's x-z plane (y -> -y)."""
        flipped = []
        for p in self.primitives:
            if isinstance(p, Sphere):
                cx, cy, cz = p.center
                flipped.append(Sphere((cx, -cy, cz), p.radius, p.label,
                                      p.emission))
            elif isinstance(p, Box):
                cx, cy, cz = p.center
                flipped.append(Box((cx, -cy, cz), p.size, p.label, p.emission))
            elif isinstance(p, Cylinder):
                cx, cy = p.center
                flipped.append(Cylinder((cx, -cy), p.z_range, p.radius,
                                        p.label, p.emission))
            else:
                raise TypeError(f"unknown primitive {type(p).__name__}")
        return Scene(primitives=flipped, background=self.background)


def _quadratic_roots(a, b, c):
    disc = b * b - 4.0 * a * c
    with np.errstate(divide="ignore", invalid="ignore"):
        sq = np.sqrt(np.where(disc >= 0, disc, np.nan))
        r1 = (-b - sq) / (2.0 * a)
        r2 = (-b + sq) / (2.0 * a)
    return (np.where(np.isfinite(r1), r1, np.inf),
            np.where(np.isfinite(r2), r2, np.inf))


def _smallest_positive_root(a, b, c):
    r1, r2 = _quadratic_roots(a, b, c)
    r1 = np.where(r1 > _EPS, r1, np.inf)
    r2 = np.where(r2 > _EPS, r2, np.inf)
    return np.minimum(r1, r2)


def render(scene: Scene, intr: SensorIntrinsics, mode: str = "standard",
           frame_id: int = 0, noise_std_mm: float = 0.0,
           rng: np.random.Generator | None = None):
    """Cast one ray per pixel, returning (scan, annotations, ground truth).

    Ranges are quantized to whole range units (mm by default) to mimic the
    sensor; the ground-truth PointImage keeps the exact hit coordinates.
    """
    origin, direction = ray_geometry(intr, mode)
    h, w = intr.shape

    hitters = list(scene.primitives)
    if scene.background is not None:
        hitters.append(scene.background)
    if hitters:
        ranges = np.stack([obj.intersect(origin, direction)
                           for obj in hitters])
        nearest = np.argmin(ranges, axis=0)
        r_exact = np.min(ranges, axis=0)
    else:
        nearest = np.zeros((h, w), dtype=int)
        r_exact = np.full((h, w), np.inf)
    valid = np.isfinite(r_exact)

    r_noisy = r_exact.copy()
    if noise_std_mm > 0.0:
        rng = rng or np.random.default_rng()
        r_noisy[valid] += rng.normal(0.0, noise_std_mm / 1000.0,
                                     size=int(valid.sum()))
    unit = intr.range_unit_mm
    range_mm = np.zeros((h, w), dtype=np.uint32)
    quant = np.rint(r_noisy[valid] * 1000.0 / unit) * unit
    range_mm[valid] = np.maximum(quant, unit).astype(np.uint32)

    signal = np.zeros((h, w), dtype=np.uint16)
    refl = np.zeros((h, w), dtype=np.uint16)
    nir = np.zeros((h, w), dtype=np.uint16)
    for k, obj in enumerate(hitters):
        sel = valid & (nearest == k)
        signal[sel] = obj.emission.signal
        refl[sel] = obj.emission.reflectivity
        nir[sel] = obj.emission.nir

    scan = LidarScan(frame_id=frame_id, intrinsics=intr, range_mm=range_mm,
                     signal=signal, reflectivity=refl, nir=nir,
                     valid=valid.copy(), completeness=1.0)

    instances = []
    for k, obj in enumerate(scene.primitives):
        if obj.label is None:
            continue
        mask = valid & (nearest == k)
        if mask.any():
            instances.append(Instance(rle=rle_encode(mask), label=obj.label))
    ann = AnnotationSet(frame_id=frame_id, height=h, width=w,
                        instances=instances)

    xyz = origin + np.where(valid, r_exact, 0.0)[..., None] * direction
    xyz[~valid] = 0.0
    truth = PointImage(xyz=xyz, valid=valid.copy(), mode=mode,
                       frame_id=frame_id)
    return scan, ann, truth


def make_stream(scenes, intr: SensorIntrinsics, path, mode: str = "standard",
                first_frame_id: int = 0) -> int:
    """Render scenes and record them as a wire-format packet file.

    Returns the number of frames written.
    """
    count = 0
    with open(path, "wb") as fh:
        for k, scene in enumerate(scenes):
            scan, _, _ = render(scene, intr, mode,
                                frame_id=first_frame_id + k)
            for packet in scan_to_packets(scan):
                fh.write(encode_packet(packet))
            count += 1
    return count


# --- scene files ---

def _emission_from(doc) -> Emission:
    return Emission(signal=int(doc.get("signal", 400)),
                    reflectivity=int(doc.get("reflectivity", 120)),
                    nir=int(doc.get("nir", 200)))


def load_scene(path) -> Scene:
    """Read a scene description JSON (primitives + optional background)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    primitives = []
    for item in doc.get("primitives", []):
        kind = item["type"]
        label = item.get("label")
        emission = _emission_from(item)
        if kind == "sphere":
            primitives.append(Sphere(tuple(item["center"]),
                                     float(item["radius"]), label, emission))
        elif kind == "box":
            primitives.append(Box(tuple(item["center"]), tuple(item["size"]),
                                  label, emission))
        elif kind == "cylinder":
            primitives.append(Cylinder(tuple(item["center"]),
                                       tuple(item["z_range"]),
                                       float(item["radius"]), label, emission))
        else:
            raise ValueError(f"unknown primitive type {kind!r}")
    background = None
    if "background" in doc:
        bg = doc["background"]
        background = Background(
            ground_z=bg.get("ground_z"),
            wall_radius=bg.get("wall_radius"),
            dome_radius=bg.get("dome_radius"),
            emission=_emission_from(bg) if any(
                k in bg for k in ("signal", "reflectivity", "nir"))
            else Background().emission,
        )
    return Scene(primitives=primitives, background=background)
