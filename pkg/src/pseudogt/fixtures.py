"""Deterministic synthetic indoor scenes with mutually consistent cues.

A scene is a ceiling strip, a back wall with a painting, a floor plane and
a row of axis-aligned furniture boxes, one of which is a table carrying
books.  From the ground truth we derive depth, a contour map whose strong
edges sit on region boundaries, teacher logits and CAMs.

In complementary mode the two cues fail on disjoint classes: the depth cue
cannot see books or paintings (they share their host's geometry), while the
CAM cue is accurate only for those small objects and weak or misplaced
elsewhere.
"""

from dataclasses import asdict, dataclass
import os

import numpy as np

from .core.classes import NUM_CLASSES
from .core.codec import save_tensor
from .core.depth import DepthMap
from .core.imageio import write_depth_png, write_label_png
from .core.rng import stream
from .errors import BadSpec

BED, BOOKS, CEIL, CHAIR, FLOOR, FURN, OBJS, PAINT, SOFA, TABLE, TV, WALL, WINDOW = range(NUM_CLASSES)
BOX_CLASSES = (BED, CHAIR, FURN, SOFA, TV, OBJS)
SMALL = (BOOKS, PAINT)


@dataclass(frozen=True)
class SceneSpec:
    height: int = 48
    width: int = 64
    n_objects: int = 3  # furniture boxes besides the table
    logit_error: float = 0.0  # fraction of pixels whose teacher logits point at a random class
    cam_error: float = 0.0  # probability that a large class's CAM blob is misplaced
    complementary: bool = True

    def validate(self):
        if self.height < 24 or self.width < 32:
            raise BadSpec(f"scene must be at least 24x32, got {self.height}x{self.width}")
        if not 0 <= self.n_objects <= 4:
            raise BadSpec("n_objects must be in 0..4")
        if self.width // (self.n_objects + 1) < 8:
            raise BadSpec("scene too narrow for the requested objects")
        for name in ("logit_error", "cam_error"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise BadSpec(f"{name} must lie in [0, 1]")
        return self

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise BadSpec(f"unknown scene fields {sorted(unknown)}")
        return cls(**d).validate()


@dataclass
class SyntheticScene:
    depth: DepthMap
    gt: np.ndarray  # (H, W) uint8
    ucm: np.ndarray  # (H, W) float in [0, 1]
    cam: np.ndarray  # (13, H, W) float in [0, 1]
    logits: np.ndarray  # (13, H, W)
    boxes: dict  # class id -> list of (y0, y1, x0, x1)
    spec: SceneSpec
    seed: int

    def save(self, out_dir):
        """Write the scene as depth.png, gt.png and f32 TensorFiles; returns the path map."""
        os.makedirs(out_dir, exist_ok=True)
        paths = {k: os.path.join(out_dir, f) for k, f in _FILES.items()}
        write_depth_png(paths["depth"], self.depth)
        write_label_png(paths["gt"], self.gt)
        save_tensor(paths["ucm"], self.ucm.astype(np.float32))
        save_tensor(paths["cam"], self.cam.astype(np.float32))
        save_tensor(paths["logits"], self.logits.astype(np.float32))
        return paths


_FILES = {"depth": "depth.png", "gt": "gt.png", "ucm": "ucm.plf", "cam": "cam.plf", "logits": "logits.plf"}


def _layout(spec, rng):
    h, w = spec.height, spec.width
    ceil_h = int(rng.integers(h // 12, h // 6 + 1))
    horizon = int(rng.integers(int(0.45 * h), int(0.6 * h) + 1))
    gt = np.full((h, w), WALL, dtype=np.uint8)
    gt[:ceil_h] = CEIL
    gt[horizon:] = FLOOR
    boxes = {}

    # painting on the wall, above the furniture line
    ph = int(rng.integers(4, max(5, (horizon - ceil_h) // 3) + 1))
    pw = int(rng.integers(6, w // 4 + 1))
    py = int(rng.integers(ceil_h + 2, max(ceil_h + 3, horizon - ph - 6)))
    px = int(rng.integers(2, w - pw - 2))
    boxes[PAINT] = [(py, py + ph, px, px + pw)]

    classes = [TABLE] + list(rng.choice(BOX_CLASSES, size=spec.n_objects, replace=False))
    rng.shuffle(classes)
    slot = w // len(classes)
    for i, c in enumerate(classes):
        bw = int(rng.integers(max(6, slot // 2), slot - 1))
        x0 = i * slot + int(rng.integers(0, slot - bw))
        top = int(rng.integers(horizon - (h - horizon) // 2 - 4, horizon))
        bottom = int(rng.integers(horizon + 3, h - 1))
        boxes.setdefault(int(c), []).append((top, bottom, x0, x0 + bw))

    # books lying on the table top
    ty0, ty1, tx0, tx1 = boxes[TABLE][0]
    bh = int(rng.integers(3, max(4, (ty1 - ty0) // 3) + 1))
    bw = int(rng.integers(3, max(4, (tx1 - tx0) // 2) + 1))
    bx = int(rng.integers(tx0 + 1, max(tx0 + 2, tx1 - bw)))
    boxes[BOOKS] = [(ty0 + 1, ty0 + 1 + bh, bx, min(bx + bw, tx1 - 1))]

    for c in (PAINT, *[int(c) for c in classes], BOOKS):
        for y0, y1, x0, x1 in boxes[c]:
            gt[y0:y1, x0:x1] = c
    return gt, boxes, ceil_h, horizon


def _depth(gt, boxes, ceil_h, horizon, rng):
    h, w = gt.shape
    wall_d = rng.uniform(3.5, 5.0)
    rows = np.arange(h, dtype=np.float64)[:, None] * np.ones((1, w))
    d = np.full((h, w), wall_d)
    fl = rows >= horizon
    d[fl] = wall_d - (wall_d - 1.0) * (rows[fl] - horizon + 1) / (h - horizon)
    ce = rows < ceil_h
    d[ce] = wall_d - 0.8 * (ceil_h - rows[ce]) / ceil_h
    for c, rects in boxes.items():
        if c in SMALL:
            continue  # books and paintings are flush with their host surface
        for y0, y1, x0, x1 in rects:
            d[y0:y1, x0:x1] = rng.uniform(1.5, wall_d - 0.8)
    return DepthMap(np.round(d, 3))


def _ucm(gt, rng):
    h, w = gt.shape
    ucm = rng.uniform(0.0, 0.1, (h, w))
    edge = np.zeros((h, w), dtype=bool)
    edge[:-1] |= gt[:-1] != gt[1:]
    edge[:, :-1] |= gt[:, :-1] != gt[:, 1:]
    ucm[edge] = rng.uniform(0.6, 1.0, int(edge.sum()))
    # weaker internal contours over-segment wall and floor
    for cls in (WALL, FLOOR):
        cols = np.nonzero((gt == cls).any(axis=0))[0]
        for x in rng.choice(cols, size=min(2, cols.size), replace=False):
            line = gt[:, x] == cls
            ucm[line, x] = np.maximum(ucm[line, x], rng.uniform(0.3, 0.5))
    return np.clip(ucm, 0.0, 1.0)


def _blob(shape, rect, peak, spread):
    """Plateau inside ``rect`` falling off as a Gaussian of the distance outside it."""
    h, w = shape
    y0, y1, x0, x1 = rect
    yy = np.arange(h)[:, None]
    xx = np.arange(w)[None, :]
    dy = np.maximum(np.maximum(y0 - yy, yy - (y1 - 1)), 0)
    dx = np.maximum(np.maximum(x0 - xx, xx - (x1 - 1)), 0)
    return peak * np.exp(-(dy * dy + dx * dx) / (2.0 * spread * spread))


def _cam(gt, boxes, spec, rng):
    h, w = gt.shape
    cam = np.zeros((NUM_CLASSES, h, w))
    for c in map(int, np.unique(gt)):
        # complementary mode keeps the small-object responses error-free
        misplaced = rng.random() < spec.cam_error and not (spec.complementary and c in SMALL)
        if c in SMALL:
            for y0, y1, x0, x1 in boxes[c]:
                if misplaced:
                    bh, bw = y1 - y0, x1 - x0
                    y0, x0 = int(rng.integers(0, h - bh + 1)), int(rng.integers(0, w - bw + 1))
                    y1, x1 = y0 + bh, x0 + bw
                cam[c] = np.maximum(cam[c], _blob((h, w), (y0, y1, x0, x1), 1.0, 1.0))
            continue
        # large classes: a weak, partial response around one point
        ys, xs = np.nonzero(gt == c)
        if misplaced:
            cy, cx = int(rng.integers(h)), int(rng.integers(w))
        else:
            i = int(rng.integers(ys.size))
            cy, cx = int(ys[i]), int(xs[i])
        ext = max(2, int(np.sqrt(ys.size) / 3))
        rect = (max(cy - ext, 0), min(cy + ext + 1, h), max(cx - ext, 0), min(cx + ext + 1, w))
        cam[c] = _blob((h, w), rect, rng.uniform(0.4, 0.68), 2.0)
    cam += rng.uniform(0.0, 0.05, cam.shape)
    return np.clip(cam, 0.0, 1.0)


def _logits(gt, boxes, spec, rng):
    h, w = gt.shape
    seen = gt.copy()
    if spec.complementary:
        seen[gt == BOOKS] = TABLE
        seen[gt == PAINT] = WALL
    if spec.logit_error > 0:
        flip = rng.random((h, w)) < spec.logit_error
        seen[flip] = rng.integers(0, NUM_CLASSES, int(flip.sum()))
    logits = rng.uniform(-1.0, 1.0, (NUM_CLASSES, h, w))
    np.put_along_axis(logits, seen[None].astype(np.int64), 4.0 + rng.uniform(-1.0, 1.0, (1, h, w)), axis=0)
    return logits


def generate_scene(seed, spec=SceneSpec()):
    """Build one scene; identical ``(seed, spec)`` give identical scenes."""
    spec = spec.validate()
    rng = stream(seed, "scene", *map(str, asdict(spec).values()))
    gt, boxes, ceil_h, horizon = _layout(spec, rng)
    depth = _depth(gt, boxes, ceil_h, horizon, rng)
    ucm = _ucm(gt, rng)
    cam = _cam(gt, boxes, spec, rng)
    logits = _logits(gt, boxes, spec, rng)
    return SyntheticScene(depth, gt, ucm, cam, logits, boxes, spec, int(seed))
