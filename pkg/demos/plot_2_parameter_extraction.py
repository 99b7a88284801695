"""
From a generated candidate to scattering parameters
===================================================

The candidate is never shown to the user directly. It is used to fit the
airlight, the transmission and a confidence map, and the confidence map is
where its hallucinations show up.
"""

import sys
from pathlib import Path

import numpy as np

from allcloud import SynthConfig, extract, generate_scene
from allcloud.io import write_raster

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out") / "extract"
out.mkdir(parents=True, exist_ok=True)

scene = generate_scene(SynthConfig(seed=3))
est = extract(scene.cloudy, scene.prior)

# airlight: median colour of the most cloud-like 15% of pixels
print("true airlight:     ", scene.light.round(4))
print("estimated airlight:", est.light.round(4), f"from {est.omega_mask.sum()} pixels")

# transmission is good wherever the ground is at all visible
t = scene.transmission
seen = t >= 0.1
print("mean |t_hat - t| where t >= 0.1:", np.abs(est.transmission - t)[seen].mean().round(4))

# confidence drops where the candidate invents texture under the cloud
u = est.confidence
print("mean confidence, thick cores:", u[t < 0.02].mean().round(3))
print("mean confidence, clear sky:  ", u[t > 0.9].mean().round(3))

# a candidate that did nothing is stable: it just says "no cloud here"
lazy = extract(scene.cloudy, scene.cloudy)
print("identity candidate, median t_hat:", np.median(lazy.transmission).round(3))

write_raster(out / "t_hat.png", est.transmission, dtype="uint8")
write_raster(out / "confidence.png", u, dtype="uint8")
write_raster(out / "omega.png", est.omega_mask.astype(float), dtype="uint8")
print("maps in", out)
