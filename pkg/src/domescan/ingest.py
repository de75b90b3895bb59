"""Scan assembly from packet streams (file or UDP) plus the throughput bench.

The assembler tolerates loss, duplication and mild reordering: duplicates
overwrite (last writer wins) and up to two frames may be open at once so
packets interleaved across a frame boundary still land in the right scan.
Missing columns stay zero-filled and invalid; completeness records the
fraction of columns received.

Rows are destaggered on emit: destaggered[b, j] = raw[b, (j - shift_b) % w],
i.e. each raw row is rolled right by pixel_shift_by_row[b].
"""

from __future__ import annotations

import re
import socket
import time
from dataclasses import dataclass

import numpy as np

from . import wire
from .errors import (BeamCountMismatch, BindFailure, DomescanError,
                     InsufficientFrames)
from .intrinsics import SensorIntrinsics
from .projection import project
from .representation import (RepresentationConfig, build_representation,
                             read_tensors, write_tensors)

# Reordering window: frames that may be open simultaneously.
OPEN_FRAME_WINDOW = 2


@dataclass
class LidarScan:
    """One destaggered H x W frame of raw measurements."""

    frame_id: int
    intrinsics: SensorIntrinsics
    range_mm: np.ndarray        # (H, W) u32
    signal: np.ndarray          # (H, W) u16
    reflectivity: np.ndarray    # (H, W) u16
    nir: np.ndarray             # (H, W) u16
    valid: np.ndarray           # (H, W) bool
    completeness: float = 1.0

    @property
    def shape(self):
        return self.range_mm.shape

    def __eq__(self, other):
        if not isinstance(other, LidarScan):
            return NotImplemented
        return (self.frame_id == other.frame_id
                and self.completeness == other.completeness
                and np.array_equal(self.range_mm, other.range_mm)
                and np.array_equal(self.signal, other.signal)
                and np.array_equal(self.reflectivity, other.reflectivity)
                and np.array_equal(self.nir, other.nir)
                and np.array_equal(self.valid, other.valid))


@dataclass
class IngestStats:
    packets: int = 0
    decode_errors: int = 0
    dropped_scans: int = 0


class _OpenFrame:
    def __init__(self, frame_id, intr):
        h, w = intr.shape
        self.frame_id = frame_id
        self.range_raw = np.zeros((h, w), dtype=np.uint32)
        self.signal = np.zeros((h, w), dtype=np.uint16)
        self.reflectivity = np.zeros((h, w), dtype=np.uint16)
        self.nir = np.zeros((h, w), dtype=np.uint16)
        self.column_seen = np.zeros(w, dtype=bool)

    def add(self, packet):
        mids = packet.measurement_id.astype(np.int64)
        self.range_raw[:, mids] = packet.range_raw.T
        self.signal[:, mids] = packet.signal.T
        self.reflectivity[:, mids] = packet.reflectivity.T
        self.nir[:, mids] = packet.nir.T
        self.column_seen[mids] = True


def _destagger(grid, shifts):
    out = np.empty_like(grid)
    for b, s in enumerate(shifts):
        out[b] = np.roll(grid[b], s)
    return out


class ScanAssembler:
    """Feed decoded packets, collect completed destaggered scans."""

    def __init__(self, intr: SensorIntrinsics):
        self.intr = intr
        self._open: dict[int, _OpenFrame] = {}
        self._order: list[int] = []

    def feed(self, packet: wire.LidarPacket) -> list[LidarScan]:
        if packet.beam_count != self.intr.beam_count:
            raise BeamCountMismatch(
                f"packet beam_count {packet.beam_count} != intrinsics "
                f"{self.intr.beam_count}")
        if int(packet.measurement_id.max()) >= self.intr.scan_width:
            raise BeamCountMismatch(
                f"measurement id {int(packet.measurement_id.max())} outside "
                f"scan width {self.intr.scan_width}")
        fid = int(packet.frame_id[0])
        if fid not in self._open:
            self._open[fid] = _OpenFrame(fid, self.intr)
            self._order.append(fid)
        self._open[fid].add(packet)
        emitted = []
        while len(self._order) > OPEN_FRAME_WINDOW:
            emitted.append(self._emit(self._order.pop(0)))
        return emitted

    def finish(self) -> list[LidarScan]:
        """Flush remaining frames (partial trailing frames included)."""
        out = [self._emit(fid) for fid in self._order]
        self._order.clear()
        return out

    def _emit(self, fid) -> LidarScan:
        of = self._open.pop(fid)
        shifts = self.intr.pixel_shift_by_row
        unit = self.intr.range_unit_mm
        range_raw = _destagger(of.range_raw, shifts)
        if unit == 1.0:
            range_mm = range_raw
        else:
            range_mm = np.rint(range_raw.astype(np.float64) * unit
                               ).astype(np.uint32)
        seen = np.broadcast_to(of.column_seen[None, :], of.range_raw.shape)
        valid = _destagger((of.range_raw != 0) & seen, shifts)
        return LidarScan(
            frame_id=fid,
            intrinsics=self.intr,
            range_mm=range_mm,
            signal=_destagger(of.signal, shifts),
            reflectivity=_destagger(of.reflectivity, shifts),
            nir=_destagger(of.nir, shifts),
            valid=valid,
            completeness=float(of.column_seen.sum()) / self.intr.scan_width,
        )


def assemble(packets, intr: SensorIntrinsics, stats: IngestStats | None = None):
    """Assemble an iterable of packet byte strings (or LidarPackets) into scans.

    Decode errors are counted in stats and the packet dropped; a beam-count
    mismatch aborts the stream.
    """
    stats = stats if stats is not None else IngestStats()
    asm = ScanAssembler(intr)
    for item in packets:
        if isinstance(item, (bytes, bytearray, memoryview)):
            try:
                packet = wire.decode_packet(bytes(item))
            except BeamCountMismatch:
                raise
            except DomescanError:
                stats.decode_errors += 1
                continue
        else:
            packet = item
        stats.packets += 1
        yield from asm.feed(packet)
    yield from asm.finish()


def assemble_file(path, intr: SensorIntrinsics,
                  stats: IngestStats | None = None):
    """Assemble a recorded stream file into scans."""
    return assemble(wire.read_stream(path), intr, stats)


def listen(port: int, intr: SensorIntrinsics,
           stats: IngestStats | None = None, max_frames: int | None = None,
           timeout: float = 5.0, host: str = "127.0.0.1"):
    """Assemble scans from UDP datagrams; one datagram = one packet.

    Stops after max_frames completed scans, or when no datagram arrives for
    `timeout` seconds (remaining partial frames are then flushed).
    """
    stats = stats if stats is not None else IngestStats()
    try:
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 1 << 24)
        sock.bind((host, port))
    except OSError as exc:
        raise BindFailure(f"cannot bind UDP {host}:{port}: {exc}") from exc
    sock.settimeout(timeout)
    asm = ScanAssembler(intr)
    emitted = 0
    try:
        while max_frames is None or emitted < max_frames:
            try:
                datagram = sock.recv(1 << 16)
            except socket.timeout:
                break
            try:
                packet = wire.decode_packet(datagram)
            except BeamCountMismatch:
                raise
            except DomescanError:
                stats.decode_errors += 1
                continue
            stats.packets += 1
            for scan in asm.feed(packet):
                yield scan
                emitted += 1
                if max_frames is not None and emitted >= max_frames:
                    return
        for scan in asm.finish():
            yield scan
            emitted += 1
            if max_frames is not None and emitted >= max_frames:
                return
    finally:
        sock.close()


@dataclass
class BenchReport:
    frames: int
    mean_latency_s: float
    p99_latency_s: float
    scans_per_second: float
    assemble_only_per_second: float = 0.0

    def to_dict(self):
        return {
            "frames": self.frames,
            "mean_latency_s": self.mean_latency_s,
            "p99_latency_s": self.p99_latency_s,
            "scans_per_second": self.scans_per_second,
            "assemble_only_per_second": self.assemble_only_per_second,
        }


def bench(path, intr: SensorIntrinsics, mode: str = "standard",
          config: RepresentationConfig | None = None,
          min_frames: int = 100) -> BenchReport:
    """Time assemble -> project -> build_representation over a recorded file.

    Packets are pre-read so the disk is out of the measured path; the clock
    covers decode, assembly, projection and representation per frame.
    """
    config = config or RepresentationConfig.seven_channel()
    raw_packets = list(wire.read_stream(path))
    frames = len(raw_packets) * 16 // max(intr.scan_width, 1)
    if frames < min_frames:
        raise InsufficientFrames(
            f"benchmark needs >= {min_frames} full frames, file holds "
            f"about {frames}")

    latencies = []
    asm_times = []
    asm = ScanAssembler(intr)
    pending_start = None
    done = 0

    def handle(scan, t0):
        nonlocal done
        points = project(scan, intr, mode)
        build_representation(scan, points, config)
        latencies.append(time.perf_counter() - t0)
        done += 1

    t_asm0 = time.perf_counter()
    for raw in raw_packets:
        if pending_start is None:
            pending_start = time.perf_counter()
        packet = wire.decode_packet(raw)
        for scan in asm.feed(packet):
            handle(scan, pending_start)
            pending_start = None
    for scan in asm.finish():
        handle(scan, pending_start or time.perf_counter())
        pending_start = None
    total = time.perf_counter() - t_asm0

    lat = np.asarray(latencies)
    return BenchReport(
        frames=done,
        mean_latency_s=float(lat.mean()),
        p99_latency_s=float(np.percentile(lat, 99)),
        scans_per_second=done / total,
    )


def scan_to_packets(scan: LidarScan) -> list[wire.LidarPacket]:
    """Inverse of assembly: re-stagger a scan and cut it into wire packets.

    Only valid pixels carry a nonzero range, so a decode-and-assemble of the
    result reproduces the scan bit for bit. Requires scan_width % 16 == 0.
    """
    intr = scan.intrinsics
    h, w = scan.shape
    if w % wire.BLOCKS_PER_PACKET:
        raise DomescanError("scan width must be a multiple of 16")
    shifts = intr.pixel_shift_by_row
    unit = intr.range_unit_mm

    def restagger(grid):
        out = np.empty_like(grid)
        for b, s in enumerate(shifts):
            out[b] = np.roll(grid[b], -s)
        return out

    range_mm = scan.range_mm.copy()
    range_mm[~scan.valid] = 0
    if unit == 1.0:
        range_raw = range_mm
    else:
        range_raw = np.rint(range_mm.astype(np.float64) / unit
                            ).astype(np.uint32)
    raw = restagger(range_raw.astype(np.uint32))
    sig = restagger(scan.signal)
    refl = restagger(scan.reflectivity)
    nir = restagger(scan.nir)

    packets = []
    for start in range(0, w, wire.BLOCKS_PER_PACKET):
        cols = slice(start, start + wire.BLOCKS_PER_PACKET)
        packets.append(wire.make_packet(
            beam_count=h,
            first_measurement_id=start,
            frame_id=scan.frame_id,
            timestamp_ns=np.arange(start, start + 16, dtype=np.uint64),
            range_raw=raw[:, cols].T,
            signal=sig[:, cols].T,
            reflectivity=refl[:, cols].T,
            nir=nir[:, cols].T,
            scan_width=w,
        ))
    return packets


# --- scan persistence (one LDT file per frame) ---

_FRAME_RE = re.compile(r"frame_(\d+)\.ldt$")


def scan_filename(frame_id: int) -> str:
    return f"frame_{frame_id}.ldt"


def write_scan(scan: LidarScan, path) -> None:
    """Persist the four raw grids plus the validity bitmap."""
    write_tensors(path, [
        scan.range_mm.astype(np.uint32),
        scan.signal.astype(np.uint32),
        scan.reflectivity.astype(np.uint32),
        scan.nir.astype(np.uint32),
        scan.valid.astype(np.uint8),
    ])


def read_scan(path, intr: SensorIntrinsics,
              frame_id: int | None = None) -> LidarScan:
    if frame_id is None:
        m = _FRAME_RE.search(str(path))
        frame_id = int(m.group(1)) if m else 0
    grids = read_tensors(path)
    if len(grids) != 5:
        raise DomescanError(f"scan file must hold 5 tensors, got {len(grids)}")
    range_mm, signal, refl, nir, valid = grids
    valid = valid.astype(bool)
    w = range_mm.shape[1]
    # Column completeness is not stored; recover it from fully-invalid
    # columns that also carry zero range (the zero-filled signature).
    received = ~np.all((range_mm == 0) & ~valid, axis=0)
    return LidarScan(
        frame_id=frame_id,
        intrinsics=intr,
        range_mm=range_mm.astype(np.uint32),
        signal=signal.astype(np.uint16),
        reflectivity=refl.astype(np.uint16),
        nir=nir.astype(np.uint16),
        valid=valid,
        completeness=float(received.sum()) / w,
    )
