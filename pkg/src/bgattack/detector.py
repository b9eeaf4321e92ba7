"""Differentiable-detector contract and a self-contained toy grid detector.

The detector interface is the method pair (forward, vjp): forward maps an
image to a set of candidate detections (box, objectness, class
probabilities), vjp maps per-detection upstream gradients back to an image
gradient.  Anything exposing that pair plugs into the attack loop.

The toy detector scores each non-overlapping s x s cell with linear
templates: objectness is a logistic matched-filter response, box
half-extents are logistic offsets around the cell center, class scores a
softmax.  Partial edge cells are dropped.  There is no NMS and no
confidence threshold here: the attack loss consumes every candidate;
thresholding belongs to evaluation, where differentiability is irrelevant.
"""

from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import CalibrationError, ContractError, DimensionError
from .scene import Sprite


def sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


@dataclass(frozen=True)
class Detection:
    box: tuple[float, float, float, float]  # x1, y1, x2, y2 in pixels
    objectness: float
    class_probs: np.ndarray
    cell_id: int


@dataclass(frozen=True)
class DetectionSet:
    detections: list[Detection]
    image_dims: tuple[int, int, int]

    def __len__(self):
        return len(self.detections)


@dataclass(frozen=True)
class UpstreamGrad:
    """Loss gradients on one detection's fields, aligned 1:1 with forward."""
    d_objectness: float = 0.0
    d_box: np.ndarray = field(default_factory=lambda: np.zeros(4))
    d_class: np.ndarray | None = None  # None means all-zero


# raw box coords are (cx - hx1, cy - hy1, cx + hx2, cy + hy2)
_BOX_SIGNS = np.array([-1.0, -1.0, 1.0, 1.0])


@dataclass(frozen=True)
class ToyGridDetector:
    cell_size: int
    num_classes: int
    w_obj: np.ndarray   # (s, s, C)
    w_box: np.ndarray   # (4, s, s, C)
    w_cls: np.ndarray   # (K, s, s, C)
    b_obj: float
    b_box: np.ndarray   # (4,)
    b_cls: np.ndarray   # (K,)

    @staticmethod
    def random(cell_size: int, num_classes: int, seed: int,
               channels: int = 3) -> "ToyGridDetector":
        gen = rng.stream(seed, rng.DOMAIN_WEIGHTS)
        s, c, k = cell_size, channels, num_classes
        return ToyGridDetector(
            cell_size=s, num_classes=k,
            w_obj=gen.normal(0.0, 0.1, (s, s, c)),
            w_box=gen.normal(0.0, 0.1, (4, s, s, c)),
            w_cls=gen.normal(0.0, 0.1, (k, s, s, c)),
            b_obj=float(gen.normal(0.0, 0.1)),
            b_box=np.zeros(4), b_cls=np.zeros(k))

    def _cells(self, image: np.ndarray):
        if image.ndim != 3:
            raise DimensionError(f"expected (H, W, C) image, got {image.shape}")
        height, width, channels = image.shape
        s = self.cell_size
        if height < s or width < s:
            raise DimensionError(
                f"image {height}x{width} smaller than one {s}x{s} cell")
        if channels != self.w_obj.shape[2]:
            raise DimensionError(
                f"image has {channels} channels, detector expects {self.w_obj.shape[2]}")
        rows, cols = height // s, width // s
        patches = image[:rows * s, :cols * s, :].reshape(
            rows, s, cols, s, channels).transpose(0, 2, 1, 3, 4)
        return rows, cols, patches  # patches: (rows, cols, s, s, C)

    def _raw_scores(self, patches):
        z_obj = np.tensordot(patches, self.w_obj, axes=3) + self.b_obj
        z_box = np.tensordot(patches, self.w_box.transpose(1, 2, 3, 0),
                             axes=3) + self.b_box
        z_cls = np.tensordot(patches, self.w_cls.transpose(1, 2, 3, 0),
                             axes=3) + self.b_cls
        return z_obj, z_box, z_cls  # (r,c), (r,c,4), (r,c,K)

    def forward(self, image: np.ndarray) -> DetectionSet:
        """One detection per cell, row-major cell order."""
        rows, cols, patches = self._cells(image)
        height, width, _ = image.shape
        s = self.cell_size
        z_obj, z_box, z_cls = self._raw_scores(patches)
        objectness = sigmoid(z_obj)
        half = s * (0.25 + 0.75 * sigmoid(z_box))
        probs = softmax(z_cls, axis=-1)
        detections = []
        for r in range(rows):
            cy = r * s + s / 2.0
            for c in range(cols):
                cx = c * s + s / 2.0
                raw = np.array([cx, cy, cx, cy]) + _BOX_SIGNS * half[r, c]
                box = (float(np.clip(raw[0], 0.0, width)),
                       float(np.clip(raw[1], 0.0, height)),
                       float(np.clip(raw[2], 0.0, width)),
                       float(np.clip(raw[3], 0.0, height)))
                detections.append(Detection(
                    box=box, objectness=float(objectness[r, c]),
                    class_probs=probs[r, c].copy(), cell_id=r * cols + c))
        return DetectionSet(detections=detections,
                            image_dims=(height, width, image.shape[2]))

    def vjp(self, image: np.ndarray, upstream: list[UpstreamGrad]) -> np.ndarray:
        """Accumulate dL/d image from per-detection gradients.

        Pixels outside any cell get zero.  `upstream` must align 1:1 with
        forward's detections on the same image.
        """
        rows, cols, patches = self._cells(image)
        height, width, channels = image.shape
        s = self.cell_size
        if len(upstream) != rows * cols:
            raise ContractError(
                f"upstream has {len(upstream)} entries, forward produced {rows * cols}")
        z_obj, z_box, z_cls = self._raw_scores(patches)
        sig_obj = sigmoid(z_obj)
        sig_box = sigmoid(z_box)
        probs = softmax(z_cls, axis=-1)
        # A clipped coordinate is constant in the image; its gradient dies.
        cys = np.arange(rows) * s + s / 2.0
        cxs = np.arange(cols) * s + s / 2.0
        centers = np.empty((rows, cols, 4))
        centers[..., 0] = centers[..., 2] = cxs[None, :]
        centers[..., 1] = centers[..., 3] = cys[:, None]
        raw = centers + _BOX_SIGNS * s * (0.25 + 0.75 * sig_box)
        lim = np.array([width, height, width, height], dtype=np.float64)
        unclipped = (raw > 0.0) & (raw < lim)

        grad = np.zeros_like(image)
        for r in range(rows):
            for c in range(cols):
                up = upstream[r * cols + c]
                d_box = np.asarray(up.d_box, dtype=np.float64)
                if d_box.shape != (4,):
                    raise ContractError(f"d_box must have 4 entries, got {d_box.shape}")
                o = sig_obj[r, c]
                g_patch = (up.d_objectness * o * (1.0 - o)) * self.w_obj
                g_zbox = (d_box * _BOX_SIGNS * unclipped[r, c]
                          * s * 0.75 * sig_box[r, c] * (1.0 - sig_box[r, c]))
                g_patch = g_patch + np.tensordot(g_zbox, self.w_box, axes=1)
                if up.d_class is not None:
                    d_cls = np.asarray(up.d_class, dtype=np.float64)
                    if d_cls.shape != (self.num_classes,):
                        raise ContractError(
                            f"d_class must have {self.num_classes} entries, "
                            f"got {d_cls.shape}")
                    p = probs[r, c]
                    g_zcls = p * (d_cls - float(d_cls @ p))
                    g_patch = g_patch + np.tensordot(g_zcls, self.w_cls, axes=1)
                grad[r * s:(r + 1) * s, c * s:(c + 1) * s, :] += g_patch
        return grad


def matched_filter_init(sprite: Sprite, cell_size: int, num_classes: int,
                        seed: int) -> ToyGridDetector:
    """Detector whose objectness template is the sprite itself.

    The template is nearest-resampled to the cell size, mean-centered, and
    scaled so a perfectly aligned sprite patch scores +4 pre-activation
    (objectness ~0.982) while any uniform patch scores exactly the bias -2
    (objectness ~0.119).  Guaranteed clean detection makes attack-induced
    collapse measurable.
    """
    h, w, channels = sprite.template.shape
    s = cell_size
    ridx = (np.arange(s) * h) // s
    cidx = (np.arange(s) * w) // s
    resampled = sprite.template[np.ix_(ridx, cidx)]
    centered = resampled - resampled.mean()
    energy = float((centered ** 2).sum())
    if energy < 1e-12:
        raise CalibrationError("constant sprite template cannot be calibrated")
    b_obj = -2.0
    w_obj = (6.0 / energy) * centered
    gen = rng.stream(seed, rng.DOMAIN_WEIGHTS)
    return ToyGridDetector(
        cell_size=s, num_classes=num_classes,
        w_obj=w_obj,
        w_box=gen.normal(0.0, 0.1, (4, s, s, channels)),
        w_cls=gen.normal(0.0, 0.1, (num_classes, s, s, channels)),
        b_obj=b_obj, b_box=np.zeros(4), b_cls=np.zeros(num_classes))
