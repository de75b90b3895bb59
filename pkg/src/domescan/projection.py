"""Euclidean reconstruction of every scan pixel from range and intrinsics.

Two equation sets are available. `standard` is the conventional spherical
form with the optics offset:

    x = (r - |n|) cos(th_enc + th_azi) cos(phi) + x_n cos(th_enc)
    y = (r - |n|) sin(th_enc + th_azi) cos(phi) + x_n sin(th_enc)
    z = (r - |n|) sin(phi) + z_n

`paper` keeps a published variant whose y uses sin(phi) and x_n cos(th_enc);
that form breaks the spherical-radius invariant and is shipped only so the
discrepancy stays inspectable instead of silently corrected.

Angles: th_enc = 2*pi*(1 - i/w), th_azi = -2*pi*alpha/360,
phi = 2*pi*beta/360, with i the measurement id, w the scan width and
(alpha, beta) the beam azimuth/altitude in degrees.

All public coordinates are meters; raw millimeter ranges are converted once
at this boundary. Everything here is pure and stateless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange
from .intrinsics import SensorIntrinsics, derived_n

MODES = ("standard", "paper")
DEFAULT_POSITION_SCALE_M = 10.0


@dataclass
class PointImage:
    """Per-pixel Euclidean coordinates in meters.

    xyz has shape (H, W, 3); invalid pixels sit exactly at the origin.
    """

    xyz: np.ndarray
    valid: np.ndarray
    mode: str
    frame_id: int = 0

    @property
    def shape(self):
        return self.xyz.shape[:2]


def angles(i, beam, intr: SensorIntrinsics):
    """(th_enc, th_azi, phi) in radians for one measurement id / beam pair.

    i may equal scan_width so the closed endpoint th_enc(w) = 0 is
    expressible; anything outside [0, w] or beam outside [0, H) raises.
    """
    if not 0 <= i <= intr.scan_width:
        raise IndexOutOfRange(f"measurement id {i} outside "
                              f"[0, {intr.scan_width}]")
    if not 0 <= beam < intr.beam_count:
        raise IndexOutOfRange(f"beam {beam} outside [0, {intr.beam_count})")
    th_enc = 2.0 * math.pi * (1.0 - i / intr.scan_width)
    th_azi = -2.0 * math.pi * intr.beam_azimuth_deg[beam] / 360.0
    phi = 2.0 * math.pi * intr.beam_altitude_deg[beam] / 360.0
    return th_enc, th_azi, phi


@lru_cache(maxsize=16)
def ray_geometry(intr: SensorIntrinsics, mode: str = "standard"):
    """Per-pixel ray origins and directions for a destaggered scan.

    For the selected equation set, the pixel coordinate is affine in range:
    p(r) = origin + r * direction, with direction the r-gradient of (x,y,z).
    Returns (origin, direction), both (H, W, 3) float64. Directions are unit
    vectors in `standard` mode only.
    """
    if mode not in MODES:
        raise ValueError(f"unknown projection mode {mode!r}")
    h, w = intr.shape
    shifts = np.asarray(intr.pixel_shift_by_row)[:, None]
    # Destaggered column j of row b came from measurement id (j - shift) % w.
    mid = (np.arange(w)[None, :] - shifts) % w
    th_enc = 2.0 * np.pi * (1.0 - mid / w)
    th_azi = -2.0 * np.pi * np.asarray(intr.beam_azimuth_deg)[:, None] / 360.0
    phi = 2.0 * np.pi * np.asarray(intr.beam_altitude_deg)[:, None] / 360.0

    total = th_enc + th_azi
    cos_t, sin_t = np.cos(total), np.sin(total)
    cos_p, sin_p = np.cos(phi), np.sin(phi)
    cos_e, sin_e = np.cos(th_enc), np.sin(th_enc)
    sin_p = np.broadcast_to(sin_p, th_enc.shape)
    cos_p = np.broadcast_to(cos_p, th_enc.shape)

    dx = cos_t * cos_p
    dz = sin_p
    if mode == "standard":
        dy = sin_t * cos_p
        oy_lift = sin_e
    else:
        dy = sin_t * sin_p
        oy_lift = cos_e
    direction = np.stack([dx, dy, dz], axis=-1)

    xn = intr.origin_to_optics_x_mm / 1000.0
    zn = intr.origin_to_optics_z_mm / 1000.0
    n = derived_n(intr) / 1000.0
    origin = np.stack([xn * cos_e - n * dx,
                       xn * oy_lift - n * dy,
                       np.full_like(dz, zn) - n * dz], axis=-1)
    return origin, direction


def project(scan, intr: SensorIntrinsics, mode: str = "standard") -> PointImage:
    """Reconstruct the point image of a scan. Invalid pixels go to (0,0,0)."""
    if scan.range_mm.shape != intr.shape:
        raise DimensionMismatch(
            f"scan grid {scan.range_mm.shape} vs intrinsics {intr.shape}")
    origin, direction = ray_geometry(intr, mode)
    r = scan.range_mm.astype(np.float64) / 1000.0
    xyz = origin + r[..., None] * direction
    xyz[~scan.valid] = 0.0
    return PointImage(xyz=xyz, valid=scan.valid.copy(), mode=mode,
                      frame_id=scan.frame_id)


def positional_channels(points: PointImage,
                        scale_m: float = DEFAULT_POSITION_SCALE_M,
                        ) -> np.ndarray:
    """Normalize xyz into three float planes in [-1, 1]; invalid pixels 0."""
    planes = np.clip(points.xyz / scale_m, -1.0, 1.0)
    planes[~points.valid] = 0.0
    return np.moveaxis(planes, -1, 0).astype(np.float32)
