"""Command line interface: ``nlhd {enhance,decompose,denoise,metrics,batch}``.

Exit status: 0 on success, 1 if any image failed, 2 for a bad configuration
or usage error.
"""
import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import _accel
from .config import MODES, ConfigError, PipelineConfig, load_config
from .decompose import decompose, reflectance_for_display
from .denoise import denoise
from .image import ImageError, load_image, save_image
from .metrics import evaluate
from .pipeline import dump_planes, enhance_pipeline, list_images, metric_row, run_batch

log = logging.getLogger("nlhd")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def _common_options():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value configuration file")
    common.add_argument("--mode", choices=MODES, help="pipeline or ablation mode")
    common.add_argument("--no-denoise", action="store_true", help="skip noise suppression")
    common.add_argument("--no-color-correct", action="store_true",
                        help="skip colour-cast correction")
    common.add_argument("--threads", type=int, help="worker threads for the parallel kernels")
    common.add_argument("--dump-intermediates", action="store_true",
                        help="also write intermediate planes next to the output")
    common.add_argument("-v", "--verbose", action="store_true")
    return common


def build_parser():
    common = _common_options()
    parser = argparse.ArgumentParser(prog="nlhd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enhance", parents=[common], help="enhance one image")
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path)

    p = sub.add_parser("decompose", parents=[common],
                       help="write illumination and reflectance planes")
    p.add_argument("input", type=Path)
    p.add_argument("prefix", type=Path, help="output prefix; '_illumination.png' etc. appended")

    p = sub.add_parser("denoise", parents=[common], help="run the two-pass denoiser only")
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path)

    p = sub.add_parser("metrics", parents=[common],
                       help="PSNR/SSIM/dE against b and LOE of a relative to b")
    p.add_argument("a", type=Path, help="image (or directory) under test")
    p.add_argument("b", type=Path, help="reference image (or directory)")

    p = sub.add_parser("batch", parents=[common], help="enhance a directory")
    p.add_argument("input_dir", type=Path)
    p.add_argument("output_dir", type=Path)
    p.add_argument("--ref", type=Path, help="directory of ground-truth images")
    return parser


def resolve_config(args):
    cfg = load_config(args.config) if args.config else PipelineConfig()
    changes = {}
    if args.mode:
        changes["mode"] = args.mode
    if args.no_denoise:
        changes["use_denoise"] = False
    if args.no_color_correct:
        changes["use_color_correct"] = False
    if args.threads is not None:
        changes["threads"] = args.threads
    try:
        return dataclasses.replace(cfg, **changes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _prefix_for(output):
    return output.with_suffix("")


def cmd_enhance(args, cfg):
    stages = {} if args.dump_intermediates else None
    out = enhance_pipeline(load_image(args.input), cfg, intermediates=stages)
    save_image(out, args.output)
    if stages:
        dump_planes(stages, _prefix_for(args.output))
    return EXIT_OK


def cmd_decompose(args, cfg):
    dec = decompose(load_image(args.input), cfg.illum, cfg.refl,
                    abs_all_reflectance=cfg.abs_all_reflectance)
    prefix = args.prefix
    save_image(dec.illumination, prefix.with_name(prefix.name + "_illumination.png"))
    save_image(reflectance_for_display(dec.reflectance),
               prefix.with_name(prefix.name + "_reflectance.png"))
    if args.dump_intermediates:
        for c, name in enumerate("rgb"):
            save_image(dec.illumination_channels[..., c],
                       prefix.with_name(f"{prefix.name}_illumination_{name}.png"))
            save_image(reflectance_for_display(dec.reflectance_channels[..., c]),
                       prefix.with_name(f"{prefix.name}_reflectance_{name}.png"))
    return EXIT_OK


def cmd_denoise(args, cfg):
    save_image(denoise(load_image(args.input), cfg.denoise), args.output)
    return EXIT_OK


def _metric_pairs(a, b):
    if a.is_dir():
        if not b.is_dir():
            raise ImageError("when the first argument is a directory the second must be too")
        for path in list_images(a):
            yield path, b / path.name
    else:
        yield a, b


def cmd_metrics(args, cfg):
    status = EXIT_OK
    for test_path, ref_path in _metric_pairs(args.a, args.b):
        try:
            test, ref = load_image(test_path), load_image(ref_path)
            report = evaluate(test, reference=ref, original=ref, loe_max_side=cfg.loe_max_side)
        except (OSError, ValueError) as exc:
            log.error("failed on %s: %s", test_path, exc)
            status = EXIT_FAILED
            continue
        print(metric_row(test_path, report))
    return status


def cmd_batch(args, cfg):
    result = run_batch(args.input_dir, args.output_dir, cfg, reference_dir=args.ref,
                       dump_intermediates=args.dump_intermediates)
    means = "\t".join(f"{k}={v:.4f}" for k, v in result.means.items())
    print(f"{len(result.rows)} images, {len(result.failures)} failed\t{means}")
    return EXIT_OK if result.ok else EXIT_FAILED


COMMANDS = {
    "enhance": cmd_enhance,
    "decompose": cmd_decompose,
    "denoise": cmd_denoise,
    "metrics": cmd_metrics,
    "batch": cmd_batch,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"nlhd: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.threads is not None:
        _accel.set_threads(cfg.threads)
    try:
        return COMMANDS[args.command](args, cfg)
    except (OSError, ValueError) as exc:
        print(f"nlhd: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
