"""Measure end-to-end throughput of decode + assemble + project + represent
over a synthetic capture file.

Run: python3 demos/04_stream_benchmark.py
"""

import tempfile
from pathlib import Path

import numpy as np

from domescan import uniform_dome
from domescan.ingest import bench
from domescan.representation import RepresentationConfig
from domescan.synth import Background, Scene, Sphere, make_stream

intr = uniform_dome(64, 512)
rng = np.random.default_rng(0)
scenes = []
for _ in range(100):
    center = (rng.uniform(1.5, 4.0), rng.uniform(-2.0, 2.0),
              rng.uniform(0.3, 1.5))
    scenes.append(Scene(
        primitives=[Sphere(center, rng.uniform(0.2, 0.5), label="person")],
        background=Background(ground_z=0.0, wall_radius=7.0)))

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "capture.bin"
    make_stream(scenes, intr, path)
    print(f"capture: {path.stat().st_size / 1e6:.1f} MB, {len(scenes)} frames")
    report = bench(path, intr, mode="standard",
                   config=RepresentationConfig.seven_channel())

print(f"frames:        {report.frames}")
print(f"throughput:    {report.scans_per_second:.1f} scans/s")
print(f"mean latency:  {1000 * report.mean_latency_s:.2f} ms/frame")
print(f"p99 latency:   {1000 * report.p99_latency_s:.2f} ms/frame")
