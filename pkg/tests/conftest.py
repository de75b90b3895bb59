import numpy as np
import pytest

from domescan import uniform_dome
from domescan.synth import Background, Box, Cylinder, Scene, Sphere


@pytest.fixture(scope="session")
def intr64():
    return uniform_dome(64, 512)


@pytest.fixture(scope="session")
def intr128():
    return uniform_dome(128, 512)


@pytest.fixture(scope="session")
def intr64_shifted():
    shifts = tuple((b * 3) % 17 - 8 for b in range(64))
    return uniform_dome(64, 512, pixel_shift_by_row=shifts)


def random_scene(rng, n_primitives=3, labeled=True):
    """Primitives scattered in front of the sensor, above the horizon."""
    kinds = [Sphere, Box, Cylinder]
    primitives = []
    for k in range(n_primitives):
        kind = kinds[int(rng.integers(len(kinds)))]
        azim = rng.uniform(0, 2 * np.pi)
        dist = rng.uniform(1.5, 6.0)
        cx, cy = dist * np.cos(azim), dist * np.sin(azim)
        cz = rng.uniform(0.3, 3.0)
        label = "person" if labeled else None
        if kind is Sphere:
            primitives.append(Sphere((cx, cy, cz), rng.uniform(0.2, 0.6),
                                     label=label))
        elif kind is Box:
            primitives.append(Box((cx, cy, cz),
                                  tuple(rng.uniform(0.3, 1.0, 3)),
                                  label=label))
        else:
            primitives.append(Cylinder((cx, cy), (cz, cz + 1.5),
                                       rng.uniform(0.15, 0.4), label=label))
    return Scene(primitives=primitives,
                 background=Background(dome_radius=9.0))


def random_packet(rng, beam_count=64, frame_id=1, first_mid=0, scan_width=512):
    from domescan.wire import make_packet
    return make_packet(
        beam_count=beam_count,
        first_measurement_id=first_mid,
        frame_id=frame_id,
        timestamp_ns=rng.integers(0, 2**63, 16, dtype=np.uint64),
        range_raw=rng.integers(0, 30_000, (16, beam_count), dtype=np.uint32),
        signal=rng.integers(0, 2**16, (16, beam_count), dtype=np.uint16),
        reflectivity=rng.integers(0, 2**16, (16, beam_count),
                                  dtype=np.uint16),
        nir=rng.integers(0, 2**16, (16, beam_count), dtype=np.uint16),
        scan_width=scan_width,
    )
