"""End-to-end enhancement and batch evaluation."""
import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _accel
from .color import compute_color_deviation, correct_saturation
from .config import PipelineConfig
from .decompose import decompose, reflectance_for_display
from .denoise import denoise
from .enhance import compose, enhance_illumination, enhance_reflectance
from .grouping import GroupProvenance, iter_groups
from .image import SUPPORTED_SUFFIXES, as_rgb, load_image, rgb_to_hsv, save_image
from .metrics import MetricReport, evaluate

log = logging.getLogger(__name__)

REPORT_COLUMNS = ("path", "psnr", "ssim", "delta_e", "loe")

_BRANCH = {"exp-only": "exp", "log-only": "log"}


def enhance_pipeline(img, cfg=PipelineConfig(), intermediates=None):
    """Enhance a low-light RGB image.

    Stages: decomposition, channel fusion, reflectance and illumination
    enhancement, recomposition into the HSV value channel, then optional
    denoising and colour correction. ``cfg.mode`` selects the ablations.
    If ``intermediates`` is a dict it receives the named planes.
    """
    img = as_rgb(img)
    if cfg.threads is not None:
        _accel.set_threads(cfg.threads)
    keep = intermediates if intermediates is not None else {}
    image_mean = float(img.mean())
    provenance = None

    if cfg.mode == "no-nlhd":
        _, _, illum = rgb_to_hsv(img)
        refl_e = 1.0
    else:
        dec = decompose(img, cfg.illum, cfg.refl,
                        abs_all_reflectance=cfg.abs_all_reflectance,
                        keep_provenance=cfg.use_color_correct)
        provenance = dec.provenance
        illum = dec.illumination
        refl_e = enhance_reflectance(dec.reflectance)
        keep["reflectance"] = reflectance_for_display(dec.reflectance)
        if cfg.mode == "illum-only":
            refl_e = 1.0
    keep["illumination"] = illum

    if cfg.mode == "refl-only":
        illum_e = illum
    else:
        illum_e = enhance_illumination(illum, image_mean, cfg.enhance,
                                       branch=_BRANCH.get(cfg.mode, "min"))
    keep["illumination_enhanced"] = np.clip(illum_e, 0.0, 1.0)

    out = compose(illum_e, refl_e, img)
    keep["composed"] = out

    if cfg.use_denoise:
        out = np.clip(denoise(out, cfg.denoise), 0.0, 1.0)
        keep["denoised"] = out

    if cfg.use_color_correct:
        if provenance is None:
            provenance = GroupProvenance.from_chunks(iter_groups(img, cfg.illum))
        deviation = compute_color_deviation(out).magnitude
        out = correct_saturation(out, deviation, provenance, cfg.color)
        keep["color_corrected"] = out
    return out


def list_images(directory):
    return sorted(p for p in Path(directory).iterdir()
                  if p.is_file() and p.suffix.lower() in SUPPORTED_SUFFIXES)


def find_reference(reference_dir, name):
    reference_dir = Path(reference_dir)
    exact = reference_dir / name
    if exact.is_file():
        return exact
    stem = Path(name).stem
    for suffix in SUPPORTED_SUFFIXES:
        for cand in (reference_dir / (stem + suffix), reference_dir / (stem + suffix.upper())):
            if cand.is_file():
                return cand
    raise FileNotFoundError(f"no reference image for {name} in {reference_dir}")


def format_value(v):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return f"{v:.6f}"


def dataset_means(reports):
    """Arithmetic mean of each metric over the rows where it is finite."""
    means = {}
    for name in REPORT_COLUMNS[1:]:
        vals = [getattr(r, name) for r in reports]
        vals = [v for v in vals if math.isfinite(v)]
        means[name] = sum(vals) / len(vals) if vals else math.nan
    return means


@dataclass
class BatchResult:
    rows: list = field(default_factory=list)      # (name, MetricReport)
    failures: list = field(default_factory=list)  # (name, message)
    means: dict = field(default_factory=dict)
    report_path: Path | None = None

    @property
    def ok(self):
        return not self.failures


def run_batch(input_dir, output_dir, cfg=PipelineConfig(), reference_dir=None,
              dump_intermediates=False):
    """Enhance every image in ``input_dir`` into ``output_dir``.

    Writes ``report.tsv`` (one row per image; PSNR/SSIM/ΔE only with a
    reference directory, LOE against the input always) and ``summary.json``
    with the dataset means. Per-file errors are logged and collected.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    result = BatchResult()
    for path in list_images(input_dir):
        try:
            img = load_image(path)
            stages = {} if dump_intermediates else None
            out = enhance_pipeline(img, cfg, intermediates=stages)
            target = output_dir / (path.stem + ".png")
            save_image(out, target)
            if dump_intermediates:
                dump_planes(stages, output_dir / path.stem)
            ref = load_image(find_reference(reference_dir, path.name)) if reference_dir else None
            report = evaluate(out, reference=ref, original=img, loe_max_side=cfg.loe_max_side)
        except Exception as exc:  # one bad file must not stop the batch
            log.error("failed on %s: %s", path, exc)
            result.failures.append((path.name, str(exc)))
            continue
        log.info("%s done", path.name)
        result.rows.append((path.name, report))

    result.means = dataset_means([r for _, r in result.rows])
    result.report_path = output_dir / "report.tsv"
    with open(result.report_path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for name, report in result.rows:
            writer.writerow([name] + [format_value(v) for v in report.as_row()])
    summary = {
        "images": len(result.rows),
        "failures": [{"path": n, "error": m} for n, m in result.failures],
        "means": {k: (None if math.isnan(v) else v) for k, v in result.means.items()},
    }
    (output_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return result


def dump_planes(stages, prefix):
    """Write each intermediate as ``<prefix>_<name>.png``."""
    prefix = Path(prefix)
    for name, plane in stages.items():
        save_image(plane, prefix.with_name(f"{prefix.name}_{name}.png"))


def metric_row(path, report):
    return "\t".join([str(path)] + [format_value(v) for v in report.as_row()])


__all__ = ["enhance_pipeline", "run_batch", "BatchResult", "MetricReport", "dataset_means"]
