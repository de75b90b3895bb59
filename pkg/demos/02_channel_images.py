"""Build the multi-channel image representation of a frame and inspect the
normalized channels, with and without the positional encoding.

Run: python3 demos/02_channel_images.py
"""

import numpy as np

from domescan import uniform_dome
from domescan.projection import project
from domescan.representation import RepresentationConfig, build_representation
from domescan.synth import Background, Scene, Sphere, render

intr = uniform_dome(64, 512)
scene = Scene(primitives=[Sphere((3.0, 0.5, 1.0), 0.5, label="person")],
              background=Background(ground_z=0.0, wall_radius=7.0))
scan, _, _ = render(scene, intr)

# Four photometric/range channels only.
rep4 = build_representation(scan, config=RepresentationConfig(
    channels=("nir", "reflectivity", "signal", "revrange")))
print("4-channel tensor:", rep4.channels.shape, rep4.channel_names)

# Full seven channels: the last three encode clamped xyz position.
points = project(scan, intr, "standard")
rep7 = build_representation(scan, points, RepresentationConfig.seven_channel())
print("7-channel tensor:", rep7.channels.shape)

for name in rep7.channel_names:
    ch = rep7.channel(name)
    print(f"  {name:>12}: min {ch.min():+.3f}  max {ch.max():+.3f}  "
          f"mean {ch.mean():+.3f}")

# revrange is 1 at the sensor and falls off with distance; invalid pixels are 0.
rev = rep7.channel("revrange")
assert np.all(rev[~scan.valid] == 0.0)
near = scan.range_mm[scan.valid].min()
print(f"nearest return {near} mm -> revrange {1 - near / 15000:.3f} "
      f"(channel max {rev.max():.3f})")
