"""End-to-end pseudo-label generation and evaluation over a batch of images."""

import json
import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from functools import reduce

import numpy as np

from .contours import DEFAULT_TAU_UCM, extract_segments
from .core.classes import CLASS_NAMES, UNKNOWN, class_id
from .core.codec import save_tensor
from .core.imageio import write_depth_png
from .core.rng import derive_seed
from .depth_adapt.noise import NoiseParams, simulate_sensor_noise
from .depth_adapt.normalize import minmax_normalize
from .errors import ConfigError, PseudoGTError
from .evaluation import coverage_stats, format_csv, format_table, report_to_dict, ucm_refine
from .fusion import (
    CategoryGroups,
    ThresholdProfile,
    confidence_filter,
    rasterize,
    step1_vote,
    step2_integrate,
)
from .io import read_depth, read_labels, read_ucm, read_volume, write_labels

INPUT_KEYS = ("logits", "cam", "ucm", "depth", "gt", "prediction")


class StageError(PseudoGTError):
    """A stage failed; ``cause`` is the underlying exception."""

    def __init__(self, stage, image, cause):
        super().__init__(f"stage {stage!r} failed on image {image!r}: {cause}")
        self.stage, self.image, self.cause = stage, image, cause

    @property
    def code(self):
        return getattr(self.cause, "code", type(self.cause).__name__)


@contextmanager
def stage(name, image):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, image, exc) from exc


@dataclass(frozen=True)
class ImageInputs:
    name: str
    logits: str
    cam: str
    ucm: str
    depth: str = None
    gt: str = None
    prediction: str = None


@dataclass(frozen=True)
class PipelineConfig:
    images: tuple
    out_dir: str = "out"
    profile: ThresholdProfile = field(default_factory=ThresholdProfile)
    groups: CategoryGroups = field(default_factory=CategoryGroups)
    tau_ucm: float = DEFAULT_TAU_UCM
    noise: NoiseParams = None
    exclude: tuple = ()
    seed: int = 0
    workers: int = 1
    refine: bool = False
    figures: bool = True

    def to_dict(self):
        return {
            "images": [asdict(im) for im in self.images],
            "out": self.out_dir,
            "thresholds": self.profile.to_dict(),
            "groups": self.groups.to_dict(),
            "tau_ucm": self.tau_ucm,
            "noise": None if self.noise is None else asdict(self.noise),
            "exclude": [CLASS_NAMES[c] for c in self.exclude],
            "seed": self.seed,
            "workers": self.workers,
            "refine": self.refine,
            "figures": self.figures,
        }


def _resolve(base, path):
    if path is None or os.path.isabs(path):
        return path
    return os.path.normpath(os.path.join(base, path))


def config_from_dict(doc, base_dir="."):
    """Build a :class:`PipelineConfig` from a JSON document.

    Images come from an ``"images"`` list, or from top-level input keys for
    a single image.  Relative paths resolve against ``base_dir``.
    """
    known = {"images", "out", "thresholds", "groups", "tau_ucm", "noise", "exclude", "seed", "workers", "refine", "figures", "name", "scene", *INPUT_KEYS}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys {sorted(unknown)}")
    entries = doc.get("images")
    if entries is None:
        entries = [{k: doc[k] for k in ("name", *INPUT_KEYS) if k in doc}] if "logits" in doc else []
    images = []
    for i, e in enumerate(entries):
        missing = {"logits", "cam", "ucm"} - set(e)
        if missing:
            raise ConfigError(f"image {i} lacks inputs {sorted(missing)}")
        paths = {k: _resolve(base_dir, e.get(k)) for k in INPUT_KEYS}
        images.append(ImageInputs(name=str(e.get("name", f"image{i:04d}")), **paths))
    names = [im.name for im in images]
    if len(set(names)) != len(names):
        raise ConfigError("image names must be unique")
    noise = doc.get("noise")
    try:
        return PipelineConfig(
            images=tuple(images),
            out_dir=_resolve(base_dir, doc.get("out", "out")),
            profile=ThresholdProfile.from_dict(doc.get("thresholds", {})),
            groups=CategoryGroups.from_dict(doc.get("groups", {})),
            tau_ucm=float(doc.get("tau_ucm", DEFAULT_TAU_UCM)),
            noise=None if noise is None else NoiseParams(**noise),
            exclude=tuple(sorted(class_id(c) for c in doc.get("exclude", ()))),
            seed=int(doc.get("seed", 0)),
            workers=int(doc.get("workers", 1)),
            refine=bool(doc.get("refine", False)),
            figures=bool(doc.get("figures", True)),
        )
    except (TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path):
    with open(path) as fh:
        doc = json.load(fh)
    return config_from_dict(doc, os.path.dirname(os.path.abspath(path)))


def with_overrides(cfg, tau_adapted=None, tau_cam=None, tau_ucm=None, exclude=None, seed=None, workers=None, out_dir=None):
    profile = cfg.profile
    if tau_adapted is not None:
        profile = replace(profile, tau_adapted=tau_adapted)
    if tau_cam is not None:
        profile = replace(profile, tau_cam=tau_cam)
    changes = {"profile": profile.validate()}
    if tau_ucm is not None:
        changes["tau_ucm"] = tau_ucm
    if exclude:
        changes["exclude"] = tuple(sorted(class_id(c) for c in exclude))
    if seed is not None:
        changes["seed"] = seed
    if workers is not None:
        changes["workers"] = workers
    if out_dir is not None:
        changes["out_dir"] = out_dir
    return replace(cfg, **changes)


@dataclass
class ImageResult:
    name: str
    maps: dict  # row name -> label map
    stats: dict  # row name -> CoverageStats (only with gt)
    paths: dict


def process_image(img, cfg):
    """Run every stage on one image, writing intermediates under ``out_dir/name``."""
    out = os.path.join(cfg.out_dir, img.name)
    os.makedirs(out, exist_ok=True)
    paths = {}

    def emit(key, filename, writer, value):
        paths[key] = os.path.join(out, filename)
        writer(paths[key], value)

    if img.depth:
        with stage("normalize", img.name):
            depth = read_depth(img.depth)
            if cfg.noise is not None:
                noise = replace(cfg.noise, seed=derive_seed(cfg.seed, "sensor-noise", img.name))
                depth = simulate_sensor_noise(depth, noise)
                emit("depth_noisy", "depth_noisy.png", write_depth_png, depth)
            norm = minmax_normalize(depth)
            emit("depth_norm", "depth_norm.plf", save_tensor, norm.values.astype(np.float32))
    with stage("filter", img.name):
        filtered = confidence_filter(read_volume(img.logits), cfg.profile.tau_adapted)
        emit("filtered", "filtered.png", write_labels, filtered)
    with stage("segment", img.name):
        seg = extract_segments(read_ucm(img.ucm), cfg.tau_ucm)
        if seg.n_segments > np.iinfo(np.uint16).max + 1:
            raise ValueError(f"{seg.n_segments} segments do not fit u16 ids")
        emit("segments", "segments.plf", save_tensor, seg.ids.astype(np.uint16))
    with stage("fuse", img.name):
        cam = read_volume(img.cam)
        step1 = step1_vote(seg, filtered)
        maps = {
            "pseudo": step2_integrate(seg, step1, cam, cfg.profile, cfg.groups),
            "depth_only": rasterize(seg, step1),
            "cam_only": step2_integrate(seg, np.full_like(step1, UNKNOWN), cam, cfg.profile, cfg.groups),
            "teacher": filtered,
        }
        emit("step1", "step1.png", write_labels, maps["depth_only"])
        emit("cam_only", "cam_only.png", write_labels, maps["cam_only"])
        emit("pseudo", "pseudo.png", write_labels, maps["pseudo"])
    if img.prediction:
        with stage("refine", img.name):
            maps["prediction"] = read_labels(img.prediction)
    if cfg.refine:
        with stage("refine", img.name):
            base = maps.get("prediction", filtered)
            maps["refined"] = ucm_refine(base, seg)
            emit("refined", "refined.png", write_labels, maps["refined"])
    stats = {}
    if img.gt:
        with stage("eval", img.name):
            gt = read_labels(img.gt)
            stats = {k: coverage_stats(m, gt, maps["pseudo"], cfg.exclude) for k, m in maps.items()}
            maps = {"gt": gt, **maps}
    if cfg.figures:
        with stage("figures", img.name):
            from .plotting import plot_label_maps

            shown = {k: maps[k] for k in ("gt", "depth_only", "cam_only", "pseudo", "refined") if k in maps}
            emit("figure", "labels.png", lambda p, m: plot_label_maps(m, p), shown)
    return ImageResult(img.name, maps, stats, paths)


@dataclass
class PipelineResult:
    images: list
    stats: dict  # row -> merged CoverageStats
    report: dict  # JSON-ready
    paths: dict


def summarize(stats, exclude=()):
    doc = {}
    for row, st in stats.items():
        every, labeled, at = st.reports(exclude)
        doc[row] = {
            "everywhere": report_to_dict(every),
            "labeled": report_to_dict(labeled),
            "at_pseudo": None if at is None else report_to_dict(at),
            "summary_percent": st.summary(exclude).as_percent(),
        }
    return doc


def run_pipeline(cfg):
    """Process every image (concurrently with ``cfg.workers`` threads) and write the merged report."""
    if not cfg.images:
        raise ConfigError("configuration lists no images")
    os.makedirs(cfg.out_dir, exist_ok=True)
    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        results = list(pool.map(lambda im: process_image(im, cfg), cfg.images))
    paths = {}
    merged = {}
    rows = [r for r in results[0].stats] if all(r.stats for r in results) else []
    for row in rows:
        merged[row] = reduce(lambda a, b: a + b, (r.stats[row] for r in results))
    report = {
        "config": cfg.to_dict(),
        "images": [r.name for r in results],
        "rows": summarize(merged, cfg.exclude),
    }
    paths["metrics_json"] = os.path.join(cfg.out_dir, "metrics.json")
    with open(paths["metrics_json"], "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if merged:
        table_rows = [(row, st.reports(cfg.exclude)[0]) for row, st in merged.items()]
        paths["metrics_txt"] = os.path.join(cfg.out_dir, "metrics.txt")
        with open(paths["metrics_txt"], "w") as fh:
            fh.write(format_table(table_rows))
        paths["metrics_csv"] = os.path.join(cfg.out_dir, "metrics.csv")
        with open(paths["metrics_csv"], "w") as fh:
            fh.write(_rows_csv(merged, cfg.exclude))
        if cfg.figures:
            from .plotting import plot_iou_bars

            paths["iou_figure"] = os.path.join(cfg.out_dir, "iou.png")
            plot_iou_bars(table_rows, paths["iou_figure"])
    return PipelineResult(results, merged, report, paths)


def _rows_csv(merged, exclude):
    out = []
    for row, st in merged.items():
        rep = st.reports(exclude)[0]
        body = format_csv(rep).splitlines()
        if not out:
            out.append("row," + body[0])
        out += [f"{row},{line}" for line in body[1:]]
    return "\n".join(out) + "\n"
