"""
A synthetic cloudy scene with known answers
===========================================

Every number the restoration produces can be checked against a generated
scene: the surface, the transmission, the airlight and the degraded image
all come out of one seeded generator.
"""

import sys
from pathlib import Path

import numpy as np

from allcloud import SynthConfig, forward_degrade, generate_scene
from allcloud.io import write_raster

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out") / "scene"
out.mkdir(parents=True, exist_ok=True)

scene = generate_scene(SynthConfig(seed=3))
t = scene.transmission
print("bands, size:", scene.surface.shape)
print("airlight:", scene.light)

# a continuum from opaque cores to clear sky, not two classes
for lo, hi in [(0, 0.02), (0.02, 0.3), (0.3, 0.9), (0.9, 1.01)]:
    print(f"t in [{lo:.2f}, {hi:.2f}): {np.mean((t >= lo) & (t < hi)):6.1%}")

# the cloudy image is exactly the imaging model applied to the surface
assert np.array_equal(scene.cloudy, forward_degrade(scene.surface, t, scene.light))

# the candidate is wrong in two ways: a soft colour cast everywhere,
# and invented fine texture where the cloud hides the ground
err = np.abs(scene.prior - scene.surface).max(axis=2)
print("candidate error under thick cloud:", err[t < 0.02].mean().round(4))
print("candidate error in clear sky:     ", err[t > 0.9].mean().round(4))

for name in ("surface", "cloudy", "prior", "reference"):
    write_raster(out / f"{name}.png", getattr(scene, name), dtype="uint8")
write_raster(out / "t.png", t, dtype="uint8")
print("quick-looks in", out)
