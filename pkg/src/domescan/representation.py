"""Model-facing channel images and the LDT tensor container.

A FrameRepresentation is a channel-first float32 image with channel order
NIR, reflectivity, signal, reversed-range, then optionally posx, posy, posz.
The reversed-range channel acts as opacity: high for near returns, exactly 0
for far returns and for pixels with no return, so both look transparent.

The numeric mapping is fully described by the channel manifest; re-running
with a recorded manifest reproduces outputs bitwise.

LDT container layout (little-endian): magic "LDT1", dtype code u8
(1 = float32, 2 = uint32, 3 = uint8), ndim u8, reserved u16, then
ndim x u32 dims, then the row-major payload. Files may hold several
concatenated tensor records.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (BadMagic, DimensionMismatch, DimOverflow, MissingPoints,
                     TruncatedFile, UnknownChannel)
from .projection import (DEFAULT_POSITION_SCALE_M, PointImage,
                         positional_channels)

BASE_CHANNELS = ("nir", "reflectivity", "signal", "revrange")
POSITION_CHANNELS = ("posx", "posy", "posz")
ALL_CHANNELS = BASE_CHANNELS + POSITION_CHANNELS

# Accepted spellings for channel names (CLI flags, ablation table rows).
CHANNEL_ALIASES = {
    "nir": "nir",
    "refl": "reflectivity",
    "reflectivity": "reflectivity",
    "signal": "signal",
    "range": "revrange",
    "revrange": "revrange",
    "posx": "posx",
    "posy": "posy",
    "posz": "posz",
}

DEFAULT_NIR_DIVISOR = 1024.0
DEFAULT_SIGNAL_DIVISOR = 1024.0
DEFAULT_REFLECTIVITY_DIVISOR = 255.0
DEFAULT_RANGE_MAX_MM = 15_000.0


def canonical_channel(name: str) -> str:
    key = name.strip().lower()
    if key not in CHANNEL_ALIASES:
        raise UnknownChannel(f"unknown channel {name!r}; known: "
                             f"{sorted(set(CHANNEL_ALIASES))}")
    return CHANNEL_ALIASES[key]


@dataclass
class RepresentationConfig:
    """Normalization parameters; all recorded into the manifest."""

    channels: tuple[str, ...] = BASE_CHANNELS
    nir_divisor: float = DEFAULT_NIR_DIVISOR
    signal_divisor: float = DEFAULT_SIGNAL_DIVISOR
    reflectivity_divisor: float = DEFAULT_REFLECTIVITY_DIVISOR
    range_max_mm: float = DEFAULT_RANGE_MAX_MM
    position_scale_m: float = DEFAULT_POSITION_SCALE_M

    def __post_init__(self):
        self.channels = tuple(canonical_channel(c) for c in self.channels)
        order = [c for c in ALL_CHANNELS if c in self.channels]
        if len(order) != len(self.channels):
            raise UnknownChannel("duplicate channel in configuration")
        self.channels = tuple(order)

    @property
    def wants_positions(self) -> bool:
        return any(c in POSITION_CHANNELS for c in self.channels)

    @classmethod
    def seven_channel(cls, **kw) -> "RepresentationConfig":
        return cls(channels=ALL_CHANNELS, **kw)


@dataclass
class FrameRepresentation:
    """Channel-first float image plus the manifest that produced it."""

    channels: np.ndarray            # (C, H, W) float32 in [-1, 1]
    manifest: dict = field(default_factory=dict)
    frame_id: int = 0

    @property
    def channel_names(self) -> tuple[str, ...]:
        return tuple(self.manifest.get("channels", ()))

    def channel(self, name: str) -> np.ndarray:
        name = canonical_channel(name)
        names = self.channel_names
        if name not in names:
            raise UnknownChannel(f"representation has no channel {name!r}")
        return self.channels[names.index(name)]

    def __eq__(self, other):
        if not isinstance(other, FrameRepresentation):
            return NotImplemented
        return (self.frame_id == other.frame_id
                and self.manifest == other.manifest
                and np.array_equal(self.channels, other.channels))


def build_representation(scan, points: PointImage | None = None,
                         config: RepresentationConfig | None = None,
                         ) -> FrameRepresentation:
    """Build the 4- or 7-channel image from a scan (+ point image for 7)."""
    config = config or RepresentationConfig()
    h, w = scan.range_mm.shape
    if config.wants_positions:
        if points is None:
            raise MissingPoints("positional channels requested but no "
                                "point image given")
        if points.xyz.shape[:2] != (h, w):
            raise DimensionMismatch(
                f"point image {points.xyz.shape[:2]} vs scan {(h, w)}")

    valid = scan.valid
    planes = {}
    planes["nir"] = np.clip(
        scan.nir.astype(np.float32) / config.nir_divisor, 0.0, 1.0)
    planes["signal"] = np.clip(
        scan.signal.astype(np.float32) / config.signal_divisor, 0.0, 1.0)
    planes["reflectivity"] = np.clip(
        scan.reflectivity.astype(np.float32) / config.reflectivity_divisor,
        0.0, 1.0)
    rev = np.clip(1.0 - scan.range_mm.astype(np.float32) / config.range_max_mm,
                  0.0, 1.0)
    rev[~valid] = 0.0
    planes["revrange"] = rev
    for name in BASE_CHANNELS:
        planes[name][~valid] = 0.0

    if config.wants_positions:
        pos = positional_channels(points, config.position_scale_m)
        planes["posx"], planes["posy"], planes["posz"] = pos

    stack = np.stack([planes[c] for c in config.channels]).astype(np.float32)
    manifest = {
        "channels": list(config.channels),
        "nir_divisor": config.nir_divisor,
        "signal_divisor": config.signal_divisor,
        "reflectivity_divisor": config.reflectivity_divisor,
        "range_max_mm": config.range_max_mm,
        "position_scale_m": config.position_scale_m,
        "source_shape": [h, w],
    }
    return FrameRepresentation(channels=stack, manifest=manifest,
                               frame_id=scan.frame_id)


def resize(rep: FrameRepresentation, target) -> FrameRepresentation:
    """Bilinear per-channel resize to (H', W').

    The reversed-range channel keeps its validity conservatively: a target
    pixel becomes 0 whenever any contributing source pixel is invalid
    (revrange == 0), so resizing never fabricates a return.
    """
    th, tw = int(target[0]), int(target[1])
    if th <= 0 or tw <= 0:
        raise DimensionMismatch("target dims must be positive")
    c, h, w = rep.channels.shape
    if (th, tw) == (h, w):
        out = rep.channels.copy()
    else:
        ys = (np.arange(th) + 0.5) * h / th - 0.5
        xs = (np.arange(tw) + 0.5) * w / tw - 0.5
        y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
        x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
        y1 = np.minimum(y0 + 1, h - 1)
        x1 = np.minimum(x0 + 1, w - 1)
        wy = np.clip(ys - y0, 0.0, 1.0).astype(np.float32)[:, None]
        wx = np.clip(xs - x0, 0.0, 1.0).astype(np.float32)[None, :]

        def interp(plane):
            p00 = plane[np.ix_(y0, x0)]
            p01 = plane[np.ix_(y0, x1)]
            p10 = plane[np.ix_(y1, x0)]
            p11 = plane[np.ix_(y1, x1)]
            top = p00 * (1 - wx) + p01 * wx
            bot = p10 * (1 - wx) + p11 * wx
            return top * (1 - wy) + bot * wy

        out = np.stack([interp(rep.channels[k]) for k in range(c)])

        names = rep.channel_names
        if "revrange" in names:
            idx = names.index("revrange")
            invalid = rep.channels[idx] == 0.0
            touched = (invalid[np.ix_(y0, x0)] | invalid[np.ix_(y0, x1)]
                       | invalid[np.ix_(y1, x0)] | invalid[np.ix_(y1, x1)])
            out[idx][touched] = 0.0
    manifest = dict(rep.manifest)
    manifest["resized_to"] = [th, tw]
    return FrameRepresentation(channels=out.astype(np.float32),
                               manifest=manifest, frame_id=rep.frame_id)


# --- LDT tensor container ---

LDT_MAGIC = b"LDT1"
_LDT_HEADER = struct.Struct("<4sBBH")
_DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<u4"), 3: np.dtype("u1")}
MAX_NDIM = 8


def _dtype_code(arr: np.ndarray) -> int:
    dt = arr.dtype
    if dt == np.float32:
        return 1
    if dt == np.uint32:
        return 2
    if dt == np.uint8:
        return 3
    raise ValueError(f"LDT cannot hold dtype {dt}; use float32/uint32/uint8")


def write_tensors(path, arrays) -> None:
    """Write tensor records back to back; bit-exact round-trip guaranteed."""
    with open(path, "wb") as fh:
        for arr in arrays:
            arr = np.ascontiguousarray(arr)
            if arr.ndim == 0 or arr.ndim > MAX_NDIM:
                raise DimOverflow(f"ndim {arr.ndim} outside [1, {MAX_NDIM}]")
            if any(d > 0xFFFFFFFF for d in arr.shape):
                raise DimOverflow("dimension does not fit in u32")
            code = _dtype_code(arr)
            fh.write(_LDT_HEADER.pack(LDT_MAGIC, code, arr.ndim, 0))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            if arr.dtype.byteorder == ">":
                arr = arr.astype(arr.dtype.newbyteorder("<"))
            fh.write(arr.tobytes())


def read_tensors(path) -> list[np.ndarray]:
    """Read all tensor records from an LDT file."""
    out = []
    with open(path, "rb") as fh:
        data = fh.read()
    pos = 0
    while pos < len(data):
        if len(data) - pos < _LDT_HEADER.size:
            raise TruncatedFile("container ends inside a record header")
        magic, code, ndim, _ = _LDT_HEADER.unpack_from(data, pos)
        if magic != LDT_MAGIC:
            raise BadMagic(f"expected {LDT_MAGIC!r}, got {magic!r}")
        if code not in _DTYPE_CODES:
            raise BadMagic(f"unknown dtype code {code}")
        if ndim == 0 or ndim > MAX_NDIM:
            raise DimOverflow(f"ndim {ndim} outside [1, {MAX_NDIM}]")
        pos += _LDT_HEADER.size
        if len(data) - pos < 4 * ndim:
            raise TruncatedFile("container ends inside the dims block")
        dims = struct.unpack_from(f"<{ndim}I", data, pos)
        pos += 4 * ndim
        dtype = _DTYPE_CODES[code]
        nbytes = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
        if len(data) - pos < nbytes:
            raise TruncatedFile(f"payload needs {nbytes} bytes, "
                                f"{len(data) - pos} remain")
        arr = np.frombuffer(data, dtype=dtype, count=int(np.prod(dims)),
                            offset=pos).reshape(dims).copy()
        pos += nbytes
        out.append(arr)
    return out


def write_representation(rep: FrameRepresentation, path) -> None:
    """Persist a representation: LDT tensor plus a JSON manifest sidecar."""
    write_tensors(path, [rep.channels.astype(np.float32)])
    sidecar = {"frame_id": rep.frame_id, "manifest": rep.manifest}
    with open(str(path) + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2)


def read_representation(path) -> FrameRepresentation:
    arrays = read_tensors(path)
    if len(arrays) != 1 or arrays[0].ndim != 3:
        raise BadMagic("representation file must hold one 3-d tensor")
    try:
        with open(str(path) + ".json", "r", encoding="utf-8") as fh:
            sidecar = json.load(fh)
    except FileNotFoundError:
        sidecar = {"frame_id": 0, "manifest": {}}
    manifest = sidecar.get("manifest", {})
    if "channels" in manifest:
        manifest["channels"] = list(manifest["channels"])
    return FrameRepresentation(channels=arrays[0].astype(np.float32),
                               manifest=manifest,
                               frame_id=int(sidecar.get("frame_id", 0)))
