"""domescan: hemisphere field-of-view LiDAR processing pipeline.

Packet ingest, point-image projection, multi-channel representations,
dataset tooling, and instance-segmentation metrics.
"""

from . import (dataset, errors, evaluation, ingest, intrinsics, projection,
               representation, synth, wire)
from .ingest import LidarScan, ScanAssembler, assemble, bench, listen
from .intrinsics import (SensorIntrinsics, derived_n, load_metadata,
                         parse_metadata, serialize_metadata, uniform_dome)
from .projection import PointImage, angles, positional_channels, project
from .representation import (FrameRepresentation, RepresentationConfig,
                             build_representation, read_representation,
                             read_tensors, resize, write_representation,
                             write_tensors)
from .wire import LidarPacket, decode_packet, encode_packet

__version__ = "0.1.0"
