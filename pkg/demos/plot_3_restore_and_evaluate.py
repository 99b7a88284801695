"""
Restoration, with and without a clear-sky reference
===================================================

Inversion, low-frequency guidance from the candidate and soft fusion with
an older clear acquisition, scored against the generated truth.
"""

import sys
from pathlib import Path

import numpy as np

from allcloud import RestoreConfig, evaluate, generate_scene, run_pipeline, SynthConfig
from allcloud.io import write_raster

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out") / "restore"
out.mkdir(parents=True, exist_ok=True)


def row(name, img, truth):
    q = evaluate(img, truth)
    print(f"{name:<22}{q.psnr:8.2f} dB{q.ssim:9.4f}")


print(f"{'':<22}{'PSNR':>11}{'SSIM':>9}")
psnrs = []
for seed in range(1, 6):
    scene = generate_scene(SynthConfig(seed=seed))
    fused = run_pipeline(scene.cloudy, scene.prior, scene.reference)
    print(f"-- seed {seed}")
    row("cloudy", scene.cloudy, scene.surface)
    row("candidate", scene.prior, scene.surface)
    row("physical inversion", fused.j_phy, scene.surface)
    row("with guidance", fused.j_cog, scene.surface)
    row("fused with reference", fused.final, scene.surface)
    psnrs.append(evaluate(fused.final, scene.surface).psnr)
print("mean fused PSNR:", np.round(np.mean(psnrs), 2))

# alignment maps the reference onto the scene's own radiometry. The
# generator's reference is 1.15 * surface + 0.03, so the ideal gain is 0.87;
# observed detail re-injected under thin cloud pulls the fit toward 1
print("gain/offset:", fused.align_params.gain.round(3), fused.align_params.offset.round(3))

# without a reference the thick cores cannot be recovered, only guided
alone = run_pipeline(scene.cloudy, scene.prior)
print("reference-free mode:", alone.mode, round(evaluate(alone.final, scene.surface).psnr, 2), "dB")

# switching both gains off leaves the plain physical inversion
plain = run_pipeline(scene.cloudy, scene.prior, rcfg=RestoreConfig(alpha=0.0, beta=0.0))
assert np.array_equal(plain.final, plain.j_phy)

write_raster(out / "final.png", fused.final, dtype="uint8")
write_raster(out / "j_cog.png", fused.j_cog, dtype="uint8")
write_raster(out / "visibility.png", fused.omega, dtype="uint8")
print("images in", out)
