"""Sensor calibration metadata: per-beam angles, optical offsets, scan geometry.

The metadata file is a minimal JSON schema carrying only the quantities the
projection equations need. Unknown extra keys are ignored with a warning so a
superset file (e.g. a full vendor dump) still parses.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantViolation, MalformedDocument, SchemaViolation

# Beam altitudes may stray slightly outside [0, 90] on a real dome.
DEFAULT_HEMISPHERE_SLACK_DEG = 5.0

_SCHEMA_KEYS = (
    "beam_count",
    "scan_width",
    "beam_altitude_deg",
    "beam_azimuth_deg",
    "origin_to_optics_x_mm",
    "origin_to_optics_z_mm",
    "pixel_shift_by_row",
    "range_unit_mm",
)


@dataclass(frozen=True)
class SensorIntrinsics:
    """Everything projection and scan assembly need to know about the sensor.

    Beam 0 corresponds to the topmost row of the scan image. Angles are kept
    in degrees; radians appear only inside the projection math.
    Immutable after construction, safe to share across threads.
    """

    beam_count: int
    scan_width: int
    beam_altitude_deg: tuple[float, ...]
    beam_azimuth_deg: tuple[float, ...]
    origin_to_optics_x_mm: float = 0.0
    origin_to_optics_z_mm: float = 0.0
    pixel_shift_by_row: tuple[int, ...] = ()
    range_unit_mm: float = 1.0
    hemisphere_slack_deg: float = field(default=DEFAULT_HEMISPHERE_SLACK_DEG,
                                        compare=False)

    def __post_init__(self):
        object.__setattr__(self, "beam_altitude_deg",
                           tuple(float(v) for v in self.beam_altitude_deg))
        object.__setattr__(self, "beam_azimuth_deg",
                           tuple(float(v) for v in self.beam_azimuth_deg))
        if not self.pixel_shift_by_row:
            object.__setattr__(self, "pixel_shift_by_row",
                               (0,) * int(self.beam_count))
        else:
            object.__setattr__(self, "pixel_shift_by_row",
                               tuple(int(v) for v in self.pixel_shift_by_row))
        self._validate()

    def _validate(self):
        if self.beam_count <= 0:
            raise InvariantViolation("beam_count", "beam_count must be > 0")
        if self.scan_width <= 0:
            raise InvariantViolation("scan_width", "scan_width must be > 0")
        if len(self.beam_altitude_deg) != self.beam_count:
            raise InvariantViolation(
                "beam_altitude_deg",
                f"expected {self.beam_count} entries, "
                f"got {len(self.beam_altitude_deg)}")
        if len(self.beam_azimuth_deg) != self.beam_count:
            raise InvariantViolation(
                "beam_azimuth_deg",
                f"expected {self.beam_count} entries, "
                f"got {len(self.beam_azimuth_deg)}")
        if len(self.pixel_shift_by_row) != self.beam_count:
            raise InvariantViolation(
                "pixel_shift_by_row",
                f"expected {self.beam_count} entries, "
                f"got {len(self.pixel_shift_by_row)}")
        if any(abs(s) >= self.scan_width for s in self.pixel_shift_by_row):
            raise InvariantViolation(
                "pixel_shift_by_row",
                "every |pixel shift| must be < scan_width")
        slack = self.hemisphere_slack_deg
        lo, hi = -slack, 90.0 + slack
        for b, alt in enumerate(self.beam_altitude_deg):
            if not (lo <= alt <= hi):
                raise InvariantViolation(
                    "beam_altitude_deg",
                    f"beam {b} altitude {alt}° outside hemisphere "
                    f"range [{lo}°, {hi}°]")
        if self.range_unit_mm <= 0:
            raise InvariantViolation("range_unit_mm",
                                     "range_unit_mm must be > 0")

    @property
    def shape(self):
        """(H, W) of the scan image."""
        return (self.beam_count, self.scan_width)

    def altitude_rad(self):
        return np.radians(np.asarray(self.beam_altitude_deg))

    def azimuth_rad(self):
        return np.radians(np.asarray(self.beam_azimuth_deg))


def derived_n(intr: SensorIntrinsics) -> float:
    """Magnitude of the optical-center offset, sqrt(x_n^2 + z_n^2), in mm."""
    return math.hypot(intr.origin_to_optics_x_mm, intr.origin_to_optics_z_mm)


def parse_metadata(text: str,
                   hemisphere_slack_deg: float = DEFAULT_HEMISPHERE_SLACK_DEG,
                   ) -> SensorIntrinsics:
    """Parse a metadata JSON document into validated SensorIntrinsics.

    Raises MalformedDocument for broken JSON, SchemaViolation for a missing
    or mistyped field, InvariantViolation for a domain-invalid table.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"metadata is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedDocument("metadata document must be a JSON object")

    unknown = sorted(set(doc) - set(_SCHEMA_KEYS))
    if unknown:
        warnings.warn(f"ignoring unknown metadata fields: {unknown}",
                      stacklevel=2)

    def require(key, kind):
        if key not in doc:
            raise SchemaViolation(key, f"missing required field '{key}'")
        value = doc[key]
        if kind is float and isinstance(value, (int, float)) \
                and not isinstance(value, bool):
            return float(value)
        if kind is int and isinstance(value, int) \
                and not isinstance(value, bool):
            return value
        if kind is list and isinstance(value, list):
            return value
        raise SchemaViolation(key, f"field '{key}' has wrong type "
                                   f"({type(value).__name__})")

    def numbers(key):
        values = require(key, list)
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise SchemaViolation(key, f"field '{key}' must hold numbers")
        return values

    return SensorIntrinsics(
        beam_count=require("beam_count", int),
        scan_width=require("scan_width", int),
        beam_altitude_deg=tuple(float(v) for v in numbers("beam_altitude_deg")),
        beam_azimuth_deg=tuple(float(v) for v in numbers("beam_azimuth_deg")),
        origin_to_optics_x_mm=require("origin_to_optics_x_mm", float),
        origin_to_optics_z_mm=require("origin_to_optics_z_mm", float),
        pixel_shift_by_row=tuple(int(v) for v in numbers("pixel_shift_by_row")),
        range_unit_mm=require("range_unit_mm", float),
        hemisphere_slack_deg=hemisphere_slack_deg,
    )


def serialize_metadata(intr: SensorIntrinsics) -> str:
    """Canonical JSON form; parse(serialize(x)) == x field for field."""
    doc = {
        "beam_count": intr.beam_count,
        "scan_width": intr.scan_width,
        "beam_altitude_deg": list(intr.beam_altitude_deg),
        "beam_azimuth_deg": list(intr.beam_azimuth_deg),
        "origin_to_optics_x_mm": intr.origin_to_optics_x_mm,
        "origin_to_optics_z_mm": intr.origin_to_optics_z_mm,
        "pixel_shift_by_row": list(intr.pixel_shift_by_row),
        "range_unit_mm": intr.range_unit_mm,
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def load_metadata(path) -> SensorIntrinsics:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_metadata(fh.read())


def uniform_dome(beam_count: int = 64, scan_width: int = 512,
                 **overrides) -> SensorIntrinsics:
    """Synthetic dome intrinsics with uniform altitude spacing over [0, 90)."""
    step = 90.0 / beam_count
    altitudes = tuple(90.0 - step * (b + 0.5) for b in range(beam_count))
    params = dict(
        beam_count=beam_count,
        scan_width=scan_width,
        beam_altitude_deg=altitudes,
        beam_azimuth_deg=(0.0,) * beam_count,
        origin_to_optics_x_mm=0.0,
        origin_to_optics_z_mm=0.0,
        pixel_shift_by_row=(0,) * beam_count,
        range_unit_mm=1.0,
    )
    params.update(overrides)
    return SensorIntrinsics(**params)
