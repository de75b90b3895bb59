"""Binary lidar packet format: the ingestion boundary for UDP and files.

Layout (little-endian): magic "DOME", version u8 (=1), beam_count u16,
reserved u8; then 16 measurement blocks, each measurement_id u16,
frame_id u16, timestamp_ns u64, followed by beam_count records of
{range_raw u32, signal u16, reflectivity u16, nir u16}.

range_raw == 0 is the canonical "no return" marker. A recorded stream file
is simply concatenated packets.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (BadMagic, InvariantViolation, TruncatedPacket,
                     UnsupportedVersion)

MAGIC = b"DOME"
VERSION = 1
BLOCKS_PER_PACKET = 16
HEADER_SIZE = 8
BLOCK_HEADER_SIZE = 12
BEAM_RECORD_SIZE = 10

_HEADER = struct.Struct("<4sBHB")


def packet_size(beam_count: int) -> int:
    """Total encoded size for a packet with the given beam count."""
    return HEADER_SIZE + BLOCKS_PER_PACKET * (
        BLOCK_HEADER_SIZE + beam_count * BEAM_RECORD_SIZE)


@lru_cache(maxsize=8)
def _block_dtype(beam_count: int) -> np.dtype:
    beam = np.dtype([("range_raw", "<u4"), ("signal", "<u2"),
                     ("reflectivity", "<u2"), ("nir", "<u2")])
    assert beam.itemsize == BEAM_RECORD_SIZE
    return np.dtype([("measurement_id", "<u2"), ("frame_id", "<u2"),
                     ("timestamp_ns", "<u8"), ("beams", beam, (beam_count,))])


@dataclass
class MeasurementBlock:
    """One column of measurements; a convenience view over packet arrays."""

    measurement_id: int
    frame_id: int
    timestamp_ns: int
    range_raw: np.ndarray       # (beam_count,) u32
    signal: np.ndarray          # (beam_count,) u16
    reflectivity: np.ndarray    # (beam_count,) u16
    nir: np.ndarray             # (beam_count,) u16


@dataclass
class LidarPacket:
    """16 measurement blocks sharing one frame, stored column-major.

    Per-beam arrays have shape (16, beam_count); scalar block fields are
    length-16 vectors.
    """

    beam_count: int
    measurement_id: np.ndarray
    frame_id: np.ndarray
    timestamp_ns: np.ndarray
    range_raw: np.ndarray
    signal: np.ndarray
    reflectivity: np.ndarray
    nir: np.ndarray

    def validate(self):
        if self.measurement_id.shape != (BLOCKS_PER_PACKET,):
            raise InvariantViolation("measurement_id",
                                     "packet must hold exactly 16 blocks")
        if self.range_raw.shape != (BLOCKS_PER_PACKET, self.beam_count):
            raise InvariantViolation(
                "range_raw", f"per-beam grids must be 16x{self.beam_count}")
        fids = np.unique(self.frame_id)
        if fids.size != 1:
            raise InvariantViolation("frame_id",
                                     "all blocks must share one frame_id")
        mids = self.measurement_id.astype(np.int64)
        steps = mids[1:] - mids[:-1]
        # Consecutive modulo scan width: +1, or a wrap back to 0. The true
        # scan width is unknown at the wire layer, so any drop to 0 passes.
        if not np.all((steps == 1) | (mids[1:] == 0)):
            raise InvariantViolation(
                "measurement_id", "block measurement_ids must be consecutive")

    @property
    def blocks(self) -> list[MeasurementBlock]:
        return [MeasurementBlock(int(self.measurement_id[k]),
                                 int(self.frame_id[k]),
                                 int(self.timestamp_ns[k]),
                                 self.range_raw[k], self.signal[k],
                                 self.reflectivity[k], self.nir[k])
                for k in range(BLOCKS_PER_PACKET)]

    def __eq__(self, other):
        if not isinstance(other, LidarPacket):
            return NotImplemented
        return (self.beam_count == other.beam_count
                and np.array_equal(self.measurement_id, other.measurement_id)
                and np.array_equal(self.frame_id, other.frame_id)
                and np.array_equal(self.timestamp_ns, other.timestamp_ns)
                and np.array_equal(self.range_raw, other.range_raw)
                and np.array_equal(self.signal, other.signal)
                and np.array_equal(self.reflectivity, other.reflectivity)
                and np.array_equal(self.nir, other.nir))


def make_packet(beam_count, first_measurement_id, frame_id, timestamp_ns,
                range_raw, signal, reflectivity, nir,
                scan_width=None) -> LidarPacket:
    """Build a packet for 16 consecutive columns starting at a measurement id.

    Column indices wrap at scan_width when given.
    """
    mids = np.arange(first_measurement_id, first_measurement_id + 16,
                     dtype=np.int64)
    if scan_width is not None:
        mids %= scan_width
    return LidarPacket(
        beam_count=beam_count,
        measurement_id=mids.astype(np.uint16),
        frame_id=np.full(16, frame_id, dtype=np.uint16),
        timestamp_ns=np.asarray(timestamp_ns, dtype=np.uint64)
        if np.ndim(timestamp_ns) else np.full(16, timestamp_ns,
                                              dtype=np.uint64),
        range_raw=np.ascontiguousarray(range_raw, dtype=np.uint32),
        signal=np.ascontiguousarray(signal, dtype=np.uint16),
        reflectivity=np.ascontiguousarray(reflectivity, dtype=np.uint16),
        nir=np.ascontiguousarray(nir, dtype=np.uint16),
    )


def encode_packet(packet: LidarPacket) -> bytes:
    """Serialize to the bit-exact wire layout. Validates invariants first."""
    packet.validate()
    header = _HEADER.pack(MAGIC, VERSION, packet.beam_count, 0)
    body = np.zeros(BLOCKS_PER_PACKET, dtype=_block_dtype(packet.beam_count))
    body["measurement_id"] = packet.measurement_id
    body["frame_id"] = packet.frame_id
    body["timestamp_ns"] = packet.timestamp_ns
    body["beams"]["range_raw"] = packet.range_raw
    body["beams"]["signal"] = packet.signal
    body["beams"]["reflectivity"] = packet.reflectivity
    body["beams"]["nir"] = packet.nir
    return header + body.tobytes()


def decode_packet(buf: bytes) -> LidarPacket:
    """Exact inverse of encode_packet on valid input.

    Never reads past the buffer; malformed input raises one of BadMagic,
    UnsupportedVersion, TruncatedPacket, or InvariantViolation.
    """
    if len(buf) < HEADER_SIZE:
        if buf[:4] != MAGIC:
            raise BadMagic("packet shorter than magic or magic mismatch")
        raise TruncatedPacket(f"header needs {HEADER_SIZE} bytes, "
                              f"got {len(buf)}")
    magic, version, beam_count, _reserved = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, got {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"version {version} not supported")
    if beam_count == 0:
        raise InvariantViolation("beam_count", "beam_count must be > 0")
    expected = packet_size(beam_count)
    if len(buf) != expected:
        raise TruncatedPacket(f"expected {expected} bytes for beam_count "
                              f"{beam_count}, got {len(buf)}")
    body = np.frombuffer(buf, dtype=_block_dtype(beam_count),
                         count=BLOCKS_PER_PACKET, offset=HEADER_SIZE)
    packet = LidarPacket(
        beam_count=beam_count,
        measurement_id=body["measurement_id"].copy(),
        frame_id=body["frame_id"].copy(),
        timestamp_ns=body["timestamp_ns"].copy(),
        range_raw=body["beams"]["range_raw"].copy(),
        signal=body["beams"]["signal"].copy(),
        reflectivity=body["beams"]["reflectivity"].copy(),
        nir=body["beams"]["nir"].copy(),
    )
    packet.validate()
    return packet


def read_stream(path):
    """Yield raw packet byte strings from a recorded stream file.

    Packet length is recomputed per packet from its header's beam_count, so
    mixed-beam-count files technically read fine. A trailing partial packet
    raises TruncatedPacket.
    """
    with open(path, "rb") as fh:
        while True:
            header = fh.read(HEADER_SIZE)
            if not header:
                return
            if len(header) < HEADER_SIZE:
                raise TruncatedPacket("trailing bytes shorter than a header")
            magic, version, beam_count, _ = _HEADER.unpack(header)
            if magic != MAGIC:
                raise BadMagic("stream desynchronized: bad packet magic")
            if version != VERSION:
                raise UnsupportedVersion(f"version {version} not supported")
            rest = fh.read(packet_size(beam_count) - HEADER_SIZE)
            if len(rest) < packet_size(beam_count) - HEADER_SIZE:
                raise TruncatedPacket("stream ends mid-packet")
            yield header + rest
