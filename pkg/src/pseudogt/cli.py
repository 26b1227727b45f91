"""Command-line entry point: ``pseudogt <subcommand> [options]``."""

import argparse
import json
import os
import sys
from dataclasses import asdict, replace

import numpy as np

from .contours import DEFAULT_TAU_UCM, SegmentMap, extract_segments
from .core.classes import class_id
from .core.codec import load_tensor, save_tensor
from .core.rng import derive_seed
from .core.imageio import write_depth_png
from .depth_adapt import (
    NoiseParams,
    TrainConfig,
    apply_mapping,
    bias_shift_fixture,
    discriminator_accuracy,
    format_trace,
    minmax_normalize,
    simulate_sensor_noise,
    train_minmax,
)
from .errors import ConfigError, PseudoGTError
from .evaluation import coverage_stats, format_csv, format_table, report_to_dict, ucm_refine
from .fixtures import SceneSpec, generate_scene
from .fusion import CategoryGroups, ThresholdProfile, confidence_filter, rasterize, step1_vote, step2_integrate
from .io import read_depth, read_labels, read_ucm, read_volume, write_labels
from .pipeline import StageError, load_config, run_pipeline, with_overrides
from .weak_local import HeadWeights, compute_cam


def _common():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--config", metavar="PATH", help="JSON configuration document")
    g.add_argument("--seed", type=int, help="master 64-bit seed")
    g.add_argument("--workers", type=int, help="concurrent images in batch mode")
    g.add_argument("--out", metavar="DIR", help="output directory (default: ./out)")
    g.add_argument("--tau-adapted", type=float)
    g.add_argument("--tau-ucm", type=float)
    g.add_argument("--tau-cam", type=float)
    g.add_argument("--exclude-class", action="append", default=[], metavar="NAME")
    g.add_argument("--no-figures", dest="figures", action="store_false", help="skip matplotlib figures")
    return p


class Settings:
    """Configuration document merged with command-line overrides."""

    def __init__(self, args):
        doc = {}
        if args.config:
            with open(args.config) as fh:
                doc = json.load(fh)
        profile = ThresholdProfile.from_dict(doc.get("thresholds", {}))
        if args.tau_adapted is not None or args.tau_cam is not None:
            d = profile.to_dict()
            if args.tau_adapted is not None:
                d["tau_adapted"] = args.tau_adapted
            if args.tau_cam is not None:
                d["tau_cam"] = args.tau_cam
            profile = ThresholdProfile.from_dict(d)
        self.profile = profile
        self.groups = CategoryGroups.from_dict(doc.get("groups", {}))
        self.tau_ucm = args.tau_ucm if args.tau_ucm is not None else float(doc.get("tau_ucm", DEFAULT_TAU_UCM))
        names = args.exclude_class or doc.get("exclude", [])
        self.exclude = tuple(sorted(class_id(n) for n in names))
        self.seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
        self.workers = args.workers if args.workers is not None else int(doc.get("workers", 1))
        self.out = args.out or doc.get("out", "out")
        self.figures = args.figures

    def path(self, name):
        os.makedirs(self.out, exist_ok=True)
        return os.path.join(self.out, name)


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _segments(args, s):
    if args.segments:
        return SegmentMap(load_tensor(args.segments).astype(np.int64))
    if args.ucm:
        return extract_segments(read_ucm(args.ucm), s.tau_ucm)
    raise ConfigError("need --segments or --ucm")


def cmd_normalize(args, s):
    norm = minmax_normalize(read_depth(args.input))
    save_tensor(s.path("depth_norm.plf"), norm.values.astype(np.float32))
    save_tensor(s.path("depth_valid.plf"), norm.valid.astype(np.uint8))


def cmd_simulate_noise(args, s):
    params = NoiseParams(args.hole_rate, args.blob_radius, args.quant_step, args.jitter, s.seed)
    noisy = simulate_sensor_noise(read_depth(args.input), params)
    write_depth_png(s.path("depth_noisy.png"), noisy)


def cmd_train_toy(args, s):
    cfg = TrainConfig(
        steps=args.steps,
        lr_mapping=args.lr_mapping,
        lr_disc=args.lr_disc,
        batch_size=args.batch_size,
        hidden=args.hidden,
        renormalize=args.renormalize,
        seed=s.seed,
    )
    src, tgt = bias_shift_fixture(args.n_maps, args.width, args.bias, s.seed, "train")
    held_src, held_tgt = bias_shift_fixture(args.n_maps, args.width, args.bias, s.seed, "heldout")
    res = train_minmax(src, tgt, cfg)
    with open(s.path("trace.csv"), "w") as fh:
        fh.write(format_trace(res.trace))
    save_tensor(s.path("noise_params.plf"), res.noise.to_array())
    save_tensor(s.path("restore_params.plf"), res.restore.to_array())
    summary = {
        "config": asdict(cfg),
        "fixture": {"n_maps": args.n_maps, "width": args.width, "bias": args.bias},
        "heldout_accuracy_noise_disc": discriminator_accuracy(
            res.d_noise, held_tgt, [apply_mapping(res.noise, x) for x in held_src]
        ),
        "heldout_accuracy_restore_disc": discriminator_accuracy(
            res.d_restore, held_src, [apply_mapping(res.restore, x) for x in held_tgt]
        ),
        "mean_shift_learned": float(np.mean([apply_mapping(res.noise, x).mean() - x.mean() for x in held_src])),
    }
    _write_json(s.path("train_summary.json"), summary)
    if s.figures:
        from .plotting import plot_loss_trace

        plot_loss_trace(res.trace, s.path("loss.png"))


def cmd_cam(args, s):
    feats = load_tensor(args.features).astype(np.float64)
    weight = load_tensor(args.weights).astype(np.float64)
    bias = load_tensor(args.bias).astype(np.float64) if args.bias else None
    cam = compute_cam(feats, HeadWeights(weight, bias), tuple(args.size))
    save_tensor(s.path("cam.plf"), cam.astype(np.float32))
    if s.figures:
        from .plotting import plot_cam

        plot_cam(cam, s.path("cam.png"))


def cmd_segment(args, s):
    seg = extract_segments(read_ucm(args.ucm), s.tau_ucm)
    save_tensor(s.path("segments.plf"), seg.ids.astype(np.uint16))


def cmd_filter(args, s):
    write_labels(s.path("filtered.png"), confidence_filter(read_volume(args.logits), s.profile.tau_adapted))


def cmd_fuse(args, s):
    seg = _segments(args, s)
    if args.filtered:
        filtered = read_labels(args.filtered)
    elif args.logits:
        filtered = confidence_filter(read_volume(args.logits), s.profile.tau_adapted)
    else:
        raise ConfigError("need --filtered or --logits")
    step1 = step1_vote(seg, filtered)
    pseudo = step2_integrate(seg, step1, read_volume(args.cam), s.profile, s.groups)
    write_labels(s.path("step1.png"), rasterize(seg, step1))
    write_labels(s.path("pseudo.png"), pseudo)


def cmd_eval(args, s):
    pred, gt = read_labels(args.pred), read_labels(args.gt)
    pseudo = read_labels(args.pseudo) if args.pseudo else None
    stats = coverage_stats(pred, gt, pseudo, s.exclude)
    every, labeled, at = stats.reports(s.exclude)
    _write_json(
        s.path("metrics.json"),
        {
            "everywhere": report_to_dict(every),
            "labeled": report_to_dict(labeled),
            "at_pseudo": None if at is None else report_to_dict(at),
            "summary_percent": stats.summary(s.exclude).as_percent(),
        },
    )
    with open(s.path("metrics.txt"), "w") as fh:
        fh.write(format_table([("everywhere", every), ("labeled", labeled)]))
    with open(s.path("metrics.csv"), "w") as fh:
        fh.write(format_csv(labeled))
    if s.figures:
        from .plotting import plot_iou_bars

        plot_iou_bars([("everywhere", every), ("labeled", labeled)], s.path("iou.png"))


def cmd_refine(args, s):
    write_labels(s.path("refined.png"), ucm_refine(read_labels(args.pred), _segments(args, s)))


def cmd_gen_fixture(args, s):
    spec = SceneSpec(
        height=args.height,
        width=args.width,
        n_objects=args.objects,
        logit_error=args.logit_error,
        cam_error=args.cam_error,
        complementary=args.complementary,
    )
    images = []
    for i in range(args.count):
        name = f"scene{i:03d}"
        scene = generate_scene(derive_seed(s.seed, "fixture", i), spec)
        paths = scene.save(s.path(name))
        images.append({"name": name, **{k: os.path.relpath(v, s.out) for k, v in paths.items()}})
    doc = {
        "images": images,
        "out": "run",
        "seed": s.seed,
        "thresholds": s.profile.to_dict(),
        "groups": s.groups.to_dict(),
        "tau_ucm": s.tau_ucm,
        "scene": asdict(spec),
    }
    _write_json(s.path("pipeline.json"), doc)


def cmd_pipeline(args, s):
    if not args.config:
        raise ConfigError("pipeline needs --config")
    cfg = with_overrides(
        load_config(args.config),
        tau_adapted=args.tau_adapted,
        tau_cam=args.tau_cam,
        tau_ucm=args.tau_ucm,
        exclude=args.exclude_class,
        seed=args.seed,
        workers=args.workers,
        out_dir=args.out,
    )
    cfg = replace(cfg, refine=cfg.refine or args.refine, figures=cfg.figures and s.figures)
    s.out = cfg.out_dir
    run_pipeline(cfg)


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="pseudogt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=func)
        return p

    p = add("normalize", cmd_normalize, "min-max normalize a depth map to [-1, 1]")
    p.add_argument("--input", required=True)

    p = add("simulate-noise", cmd_simulate_noise, "corrupt a clean depth map like a depth sensor")
    p.add_argument("--input", required=True)
    p.add_argument("--hole-rate", type=float, default=0.0)
    p.add_argument("--blob-radius", type=float, default=0.0)
    p.add_argument("--quant-step", type=float, default=0.0)
    p.add_argument("--jitter", type=float, default=0.0)

    p = add("train-toy", cmd_train_toy, "min-max training of toy noise/restore mappings on a bias-shift fixture")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--lr-mapping", type=float, default=TrainConfig.lr_mapping)
    p.add_argument("--lr-disc", type=float, default=TrainConfig.lr_disc)
    p.add_argument("--batch-size", type=int, default=TrainConfig.batch_size)
    p.add_argument("--hidden", type=int, default=TrainConfig.hidden)
    p.add_argument("--n-maps", type=int, default=64)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--bias", type=float, default=0.3)
    p.add_argument("--renormalize", action="store_true", help="re-apply min-max normalization after each mapping")

    p = add("cam", cmd_cam, "class activation maps from features and head weights")
    p.add_argument("--features", required=True, help="TensorFile (d, h, w)")
    p.add_argument("--weights", required=True, help="TensorFile (C, d)")
    p.add_argument("--bias", help="TensorFile (C,)")
    p.add_argument("--size", type=int, nargs=2, required=True, metavar=("H", "W"))

    p = add("segment", cmd_segment, "threshold a UCM into segments")
    p.add_argument("--ucm", required=True)

    p = add("filter", cmd_filter, "softmax-threshold teacher logits")
    p.add_argument("--logits", required=True)

    p = add("fuse", cmd_fuse, "two-step cue integration into pseudo labels")
    p.add_argument("--segments")
    p.add_argument("--ucm")
    p.add_argument("--filtered")
    p.add_argument("--logits")
    p.add_argument("--cam", required=True)

    p = add("eval", cmd_eval, "metrics of a label map against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--pseudo", help="pseudo-label map restricting the @pseudo metrics")

    p = add("refine", cmd_refine, "contour-wise majority vote over predictions")
    p.add_argument("--pred", required=True)
    p.add_argument("--segments")
    p.add_argument("--ucm")

    p = add("gen-fixture", cmd_gen_fixture, "write synthetic scenes and a pipeline config")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--height", type=int, default=SceneSpec.height)
    p.add_argument("--width", type=int, default=SceneSpec.width)
    p.add_argument("--objects", type=int, default=SceneSpec.n_objects)
    p.add_argument("--logit-error", type=float, default=0.1)
    p.add_argument("--cam-error", type=float, default=0.3)
    p.add_argument("--no-complementary", dest="complementary", action="store_false")

    p = add("pipeline", cmd_pipeline, "run every stage over the images of a config")
    p.add_argument("--refine", action="store_true", help="also write contour-refined predictions")
    return parser


def _error_record(exc, command):
    rec = {"command": command, "error": getattr(exc, "code", type(exc).__name__), "message": str(exc)}
    if isinstance(exc, StageError):
        rec.update(stage=exc.stage, image=exc.image)
    return rec


def main(argv=None):
    args = build_parser().parse_args(argv)
    settings = None
    try:
        settings = Settings(args)
        args.func(args, settings)
    except (PseudoGTError, OSError, ValueError, KeyError) as exc:
        rec = _error_record(exc, args.command)
        print(json.dumps(rec, sort_keys=True), file=sys.stderr)
        if settings is not None and os.path.isdir(settings.out):
            _write_json(os.path.join(settings.out, "error.json"), rec)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
