"""Command-line front end: ``run``, ``synth`` and ``eval``.

Exit codes: 0 on success, 1 for input problems (missing files, mismatched
dimensions, candidate fetch failures, unreadable pairs), 2 for invalid
configuration or arguments.
"""

import argparse
import json
import logging
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, dump_config, load_config
from .extract import extract
from .io import read_raster, write_field, write_json, write_raster
from .metrics import evaluate
from .prior import DEFAULT_PROMPT, PriorError, PriorSpec, acquire_prior
from .restore import restore
from .scattering import SynthConfig, generate_scene

logger = logging.getLogger("allcloud")

METRICS_SCHEMA = {
    "type": "object",
    "required": ["scene", "psnr_db", "ssim", "per_band_psnr", "mode"],
    "properties": {
        "scene": {"type": "string"},
        "psnr_db": {"type": "number", "minimum": 0},
        "ssim": {"type": "number", "minimum": -1, "maximum": 1},
        "per_band_psnr": {"type": "array", "items": {"type": "number"}},
        "mode": {"type": "string"},
    },
}
EVAL_SCHEMA = {
    "type": "object",
    "required": ["rows", "mean"],
    "properties": {
        "rows": {"type": "array", "items": METRICS_SCHEMA},
        "mean": METRICS_SCHEMA,
    },
}


class InputError(Exception):
    pass


@contextmanager
def _timed(timings, stage):
    start = time.perf_counter()
    yield
    timings[stage] = round((time.perf_counter() - start) * 1000.0, 3)


def _metrics_row(scene, report, mode):
    return {"scene": scene, "psnr_db": report.psnr, "ssim": report.ssim,
            "per_band_psnr": report.per_band_psnr, "mode": mode}


def _read_input(path, what):
    try:
        return read_raster(path)
    except FileNotFoundError as exc:
        raise InputError(f"{what}: {exc}") from exc
    except ValueError as exc:
        raise InputError(f"{what}: {exc}") from exc


def cmd_run(args):
    try:
        configs = load_config(args.config, args.set)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    fcfg, ecfg, rcfg = configs["filters"], configs["extraction"], configs["restore"]
    out = Path(args.out)
    timings = {}

    try:
        if args.prior_url:
            spec = PriorSpec(mode="remote", endpoint=args.prior_url, prompt=args.prompt,
                             timeout=args.timeout)
        else:
            spec = PriorSpec(mode="file", path=args.prior)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        with _timed(timings, "load"):
            cloudy = _read_input(args.cloudy, "cloudy image")
            reference = _read_input(args.ref, "reference image") if args.ref else None
            truth = _read_input(args.truth, "truth image") if args.truth else None
            for name, img in (("reference", reference), ("truth", truth)):
                if img is not None and img.shape != cloudy.shape:
                    raise InputError(f"{name} shape {img.shape} does not match cloudy {cloudy.shape}")
        with _timed(timings, "prior"):
            prior = acquire_prior(spec, cloudy)
    except (InputError, PriorError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    out.mkdir(parents=True, exist_ok=True)
    inputs = {Path(p).resolve() for p in (args.cloudy, args.prior, args.ref, args.truth) if p}
    with _timed(timings, "extract"):
        estimate = extract(cloudy, prior, fcfg, ecfg)
    with _timed(timings, "restore"):
        bundle = restore(cloudy, prior, reference, estimate, fcfg, rcfg)

    def target(name):
        path = out / name
        if path.resolve() in inputs:
            raise InputError(f"refusing to overwrite input {path}")
        return path

    try:
        with _timed(timings, "write"):
            write_raster(target("final.tif"), bundle.final)
            (out / "config.ini").write_text(dump_config(configs))
            if args.dump_intermediates:
                write_raster(target("j_vlm.tif"), prior)
                write_json(target("airlight.json"), {
                    "airlight": estimate.light.tolist(),
                    "fallback": estimate.airlight_fallback,
                    "omega_pixels": int(estimate.omega_mask.sum()),
                    "lambda_phy": estimate.lambda_phy,
                    "lambda_hall": estimate.lambda_hall,
                })
                write_field(target("t.tif"), estimate.transmission)
                write_field(target("u.tif"), estimate.confidence)
                write_raster(target("j_phy.tif"), bundle.j_phy)
                write_raster(target("j_cog.tif"), bundle.j_cog)
                write_field(target("omega.tif"), bundle.omega)
                if bundle.ref_aligned is not None:
                    write_raster(target("ref_aligned.tif"), bundle.ref_aligned)
            if truth is not None:
                row = _metrics_row(args.scene, evaluate(bundle.final, truth), bundle.mode)
                write_json(target("metrics.json"), row)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    align = bundle.align_params
    write_json(out / "manifest.json", {
        "version": __version__,
        "inputs": {"cloudy": args.cloudy, "prior": args.prior, "prior_url": args.prior_url,
                   "reference": args.ref, "truth": args.truth},
        "config_path": args.config,
        "overrides": list(args.set),
        "output_dir": str(out),
        "dump_intermediates": bool(args.dump_intermediates),
        "mode": {"reference_free": bundle.mode == "reference-free",
                 "remote_prior": spec.mode == "remote"},
        "alignment": None if align is None else {
            "gain": align.gain.tolist(), "offset": align.offset.tolist(),
            "support": align.support, "fallback": align.fallback},
        "timings_ms": timings,
    })
    return 0


def cmd_synth(args):
    try:
        configs = load_config(args.config, args.set)
        base = configs["synth"].to_dict()
        for key in base:
            value = getattr(args, key, None)
            if value is not None:
                base[key] = value
        cfg = SynthConfig(**base)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    scene = generate_scene(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_raster(out / "surface.tif", scene.surface)
    write_field(out / "t.tif", scene.transmission)
    write_json(out / "airlight.json", {"airlight": scene.light.tolist()})
    write_raster(out / "cloudy.tif", scene.cloudy)
    write_raster(out / "prior.tif", scene.prior)
    write_raster(out / "reference.tif", scene.reference)
    write_json(out / "synth_config.json", cfg.to_dict())
    return 0


def _parse_pair(item):
    scene, eq, rest = item.partition("=")
    if not eq:
        scene, rest = None, item
    result, comma, truth = rest.partition(",")
    if not comma:
        raise InputError(f"pair must look like [scene=]result,truth, got {item!r}")
    return scene or Path(result).stem, result, truth


def format_table(rows, mean):
    header = f"{'Scene':<16}{'PSNR':>10}{'SSIM':>10}"
    lines = [header, "-" * len(header)]
    for row in rows + [mean]:
        lines.append(f"{row['scene']:<16}{row['psnr_db']:>10.3f}{row['ssim']:>10.4f}")
    return "\n".join(lines) + "\n"


def cmd_eval(args):
    pairs = []
    try:
        for item in args.pairs or []:
            pairs.append(_parse_pair(item))
        if args.root:
            for sub in sorted(p for p in Path(args.root).iterdir() if p.is_dir()):
                truth = next((sub / n for n in ("truth.tif", "surface.tif") if (sub / n).exists()), None)
                if (sub / "final.tif").exists() and truth is not None:
                    pairs.append((sub.name, str(sub / "final.tif"), str(truth)))
        if not pairs:
            raise InputError("no result/truth pairs given")
        rows = []
        for scene, result, truth in pairs:
            a = _read_input(result, f"result for {scene}")
            b = _read_input(truth, f"truth for {scene}")
            if a.shape != b.shape:
                raise InputError(f"{scene}: result {a.shape} and truth {b.shape} differ in shape")
            rows.append(_metrics_row(scene, evaluate(a, b), "eval"))
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    bands = len(rows[0]["per_band_psnr"])
    mean = {
        "scene": "mean",
        "psnr_db": float(np.mean([r["psnr_db"] for r in rows])),
        "ssim": float(np.mean([r["ssim"] for r in rows])),
        "per_band_psnr": [float(np.mean([r["per_band_psnr"][c] for r in rows if len(r["per_band_psnr"]) == bands]))
                          for c in range(bands)],
        "mode": "eval",
    }
    report = {"rows": rows, "mean": mean}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "eval.json", report)
    table = format_table(rows, mean)
    (out / "eval.txt").write_text(table)
    print(table, end="")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="allcloud", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="restore a cloudy scene")
    run.add_argument("--cloudy", required=True)
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--prior", help="candidate image on disk")
    src.add_argument("--prior-url", help="image-editing endpoint; token read from $ALLCLOUD_PRIOR_TOKEN")
    run.add_argument("--prompt", default=DEFAULT_PROMPT)
    run.add_argument("--timeout", type=float, default=300.0)
    run.add_argument("--ref", help="clear-sky temporal reference; omit for reference-free mode")
    run.add_argument("--config")
    run.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    run.add_argument("--out", required=True)
    run.add_argument("--truth")
    run.add_argument("--scene", default="scene")
    run.add_argument("--dump-intermediates", action="store_true")
    run.set_defaults(func=cmd_run)

    synth = sub.add_parser("synth", help="write a synthetic scene with ground truth")
    synth.add_argument("--out", required=True)
    synth.add_argument("--config")
    synth.add_argument("--set", action="append", default=[], metavar="synth.KEY=VALUE")
    synth.add_argument("--seed", type=int)
    synth.add_argument("--size", type=int)
    synth.add_argument("--bands", type=int)
    synth.add_argument("--thick-core-fraction", type=float)
    synth.add_argument("--thin-fraction", type=float)
    synth.add_argument("--hallucination-amplitude", type=float)
    synth.add_argument("--hallucination-hf-gain", type=float)
    synth.add_argument("--ref-gain", type=float)
    synth.add_argument("--ref-offset", type=float)
    synth.add_argument("--airlight", type=float)
    synth.set_defaults(func=cmd_synth)

    ev = sub.add_parser("eval", help="PSNR/SSIM table for result/truth pairs")
    ev.add_argument("--pairs", nargs="+", metavar="[SCENE=]RESULT,TRUTH")
    ev.add_argument("--root", help="directory of scene folders holding final.tif and truth.tif")
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
