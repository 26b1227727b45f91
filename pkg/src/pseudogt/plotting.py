"""Report figures.  Uses the Agg backend and strips PNG metadata so output is byte-stable."""

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .core.classes import CLASS_NAMES, NUM_CLASSES, UNKNOWN  # noqa: E402

PALETTE = (
    (230, 25, 75),
    (60, 180, 75),
    (255, 225, 25),
    (0, 130, 200),
    (245, 130, 48),
    (145, 30, 180),
    (70, 240, 240),
    (240, 50, 230),
    (210, 245, 60),
    (250, 190, 190),
    (0, 128, 128),
    (170, 110, 40),
    (128, 128, 128),
)

RC = {
    "font.size": 9,
    "axes.titlesize": 9,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "pseudogt",
}


def _save(fig, path):
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def colorize(labels):
    """RGB image of a label map; UNKNOWN is black."""
    lut = np.zeros((256, 3), dtype=np.uint8)
    lut[:NUM_CLASSES] = PALETTE
    return lut[np.asarray(labels, dtype=np.uint8)]


def plot_label_maps(maps, path):
    """Side-by-side label maps, ``maps`` is an ordered ``{title: label map}``."""
    with plt.rc_context(RC):
        n = len(maps)
        fig, axes = plt.subplots(1, n, figsize=(2.6 * n, 2.4), squeeze=False)
        for ax, (title, lab) in zip(axes[0], maps.items()):
            ax.imshow(colorize(lab), interpolation="nearest")
            ax.set_title(title)
            ax.set_axis_off()
        present = sorted({int(v) for lab in maps.values() for v in np.unique(lab)} - {UNKNOWN})
        handles = [plt.Rectangle((0, 0), 1, 1, color=np.array(PALETTE[c]) / 255) for c in present]
        fig.legend(handles, [CLASS_NAMES[c] for c in present], loc="lower center", ncol=min(7, len(present) or 1), frameon=False)
        fig.subplots_adjust(bottom=0.22, top=0.88, wspace=0.05)
        _save(fig, path)


def plot_iou_bars(rows, path):
    """Grouped per-class IoU bars for ``[(name, MetricReport), ...]``."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(8.0, 3.0))
        width = 0.8 / max(len(rows), 1)
        x = np.arange(NUM_CLASSES)
        for i, (name, rep) in enumerate(rows):
            iou = np.nan_to_num(rep.iou, nan=0.0) * 100
            label = name if math.isnan(rep.miou) else f"{name} (mIoU {100 * rep.miou:.1f})"
            ax.bar(x + (i - (len(rows) - 1) / 2) * width, iou, width, label=label)
        ax.set_xticks(x)
        ax.set_xticklabels(CLASS_NAMES, rotation=45, ha="right")
        ax.set_ylabel("IoU (%)")
        ax.set_ylim(0, 100)
        ax.legend(frameon=False, loc="upper right")
        fig.tight_layout()
        _save(fig, path)


def plot_loss_trace(trace, path):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.0))
        steps = [r.step for r in trace]
        for attr, label in (("l_noise", "noise"), ("l_restore", "restore"), ("l_cycle", "cycle"), ("total", "total")):
            ax.plot(steps, [getattr(r, attr) for r in trace], lw=0.8, label=label)
        ax.axhline(-2 * math.log(2), color="0.6", ls=":", lw=0.8)
        ax.set_xlabel("step")
        ax.set_ylabel("loss")
        ax.legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)


def plot_cam(cam, path, classes=None):
    """Grid of CAM channels, all classes by default."""
    classes = list(range(cam.shape[0])) if classes is None else list(classes)
    with plt.rc_context(RC):
        cols = min(5, len(classes))
        rows = math.ceil(len(classes) / cols)
        fig, axes = plt.subplots(rows, cols, figsize=(2.0 * cols, 1.8 * rows), squeeze=False)
        for ax in axes.ravel():
            ax.set_axis_off()
        for ax, c in zip(axes.ravel(), classes):
            ax.imshow(cam[c], vmin=0.0, vmax=1.0, cmap="magma")
            ax.set_title(CLASS_NAMES[c] if c < NUM_CLASSES else str(c))
        fig.tight_layout()
        _save(fig, path)
