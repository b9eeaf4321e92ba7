"""Synthetic sprite scenes, adversarial composition, and physical adaptation.

A Scene is a flat-background canvas with sprites pasted at non-overlapping
positions, the exact per-pixel object mask, and ground-truth boxes.  Scenes
stand in for photographic datasets: small enough to optimize against in
seconds, exact enough that masks and ground truth are known by construction.

Adversarial examples replace the background region with a perturbation:

    composed = image * M_objs + perturbation * M_bg,   M_bg = 1 - M_objs

so perturbing a background pixel changes the composite one-for-one and
perturbing an object pixel changes nothing.

Physical adaptation jitters contrast/brightness and adds pixel noise before
composition, simulating imaging variation so perturbations cannot overfit
exact pixel values.
"""

from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import CapacityError, ConfigError, DimensionError
from .masks import expand_mask
from .tensor import clamp01, freeze, hadamard, lincomb


@dataclass(frozen=True)
class Sprite:
    template: np.ndarray  # (h, w, C), values in [0, 1]
    class_id: int
    coverage: np.ndarray | None = None  # (h, w) binary; None = full rectangle

    def __post_init__(self):
        t = self.template
        if t.ndim != 3:
            raise DimensionError(f"sprite template must be (h, w, C), got {t.shape}")
        if t.min() < 0.0 or t.max() > 1.0:
            raise ConfigError("sprite template values must lie in [0, 1]")
        if self.class_id < 0:
            raise ConfigError("class_id must be non-negative")
        freeze(t)
        if self.coverage is None:
            object.__setattr__(self, "coverage",
                               np.ones(t.shape[:2], dtype=np.float64))
        elif self.coverage.shape != t.shape[:2]:
            raise DimensionError(
                f"coverage {self.coverage.shape} vs template {t.shape[:2]}")
        elif not self.coverage.any():
            raise ConfigError("sprite coverage must mark at least one pixel")
        freeze(self.coverage)


@dataclass(frozen=True)
class GtBox:
    x1: int
    y1: int
    x2: int
    y2: int
    class_id: int

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ConfigError(f"degenerate box {self}")


@dataclass(frozen=True)
class Scene:
    image: np.ndarray        # (H, W, C)
    object_mask: np.ndarray  # (H, W, 1), binary
    ground_truth: list[GtBox] = field(default_factory=list)


def make_sprite(shape: str, size: int, class_id: int,
                fg: float = 0.8, bg: float = 0.5) -> Sprite:
    """Built-in high-contrast sprite templates: disk, cross, checker, solid.

    A disk covers only its disk pixels (the template corners stay
    background the attack may repaint); the other shapes cover their full
    square.
    """
    if size < 2:
        raise ConfigError(f"sprite size must be >= 2, got {size}")
    t = np.full((size, size, 3), bg, dtype=np.float64)
    coverage = None
    if shape == "disk":
        c = (size - 1) / 2.0
        radius = size * 0.42
        yy, xx = np.mgrid[0:size, 0:size]
        inside = (yy - c) ** 2 + (xx - c) ** 2 <= radius ** 2
        t[inside] = fg
        coverage = inside.astype(np.float64)
    elif shape == "cross":
        arm = max(1, size // 4)
        lo, hi = (size - arm) // 2, (size + arm) // 2
        t[lo:hi, :, :] = fg
        t[:, lo:hi, :] = fg
    elif shape == "checker":
        yy, xx = np.mgrid[0:size, 0:size]
        t[((yy // 2) + (xx // 2)) % 2 == 0] = fg
    elif shape == "solid":
        t[:, :, :] = fg
    else:
        raise ConfigError(f"unknown sprite shape {shape!r}")
    return Sprite(template=t, class_id=class_id, coverage=coverage)


def _sample_position(gen, extent_max: int, align: int, offset: int) -> int:
    """Uniform placement coordinate in [0, extent_max], optionally snapped
    to offset + k*align."""
    if align <= 1:
        return int(gen.integers(0, extent_max + 1))
    slots = (extent_max - offset) // align
    if offset > extent_max or slots < 0:
        raise CapacityError("no aligned placement slots available")
    return offset + align * int(gen.integers(0, slots + 1))


def _overlaps(a, b) -> bool:
    ay, ax, ah, aw = a
    by, bx, bh, bw = b
    return not (ay + ah <= by or by + bh <= ay or ax + aw <= bx or bx + bw <= ax)


def generate_scene(seed: int, sprites: list[Sprite], canvas: tuple[int, int, int],
                   background_fill: float = 0.5,
                   place_align: int = 1, place_offset: int = 0) -> Scene:
    """Deterministic scene for a seed: sprites at sampled non-overlapping
    positions, mask and ground truth exactly consistent with the placements.

    place_align/place_offset snap placements to a pixel grid (default: none).
    Aligning placements to detector cells keeps the toy detector's response
    to a clean sprite identical across scenes, which pins the clean
    detection rate at 1.0 in calibrated setups.
    """
    height, width, channels = canvas
    if not 0.0 <= background_fill <= 1.0:
        raise ConfigError("background_fill must lie in [0, 1]")
    if place_align < 1 or place_offset < 0:
        raise ConfigError("place_align must be >= 1 and place_offset >= 0")
    image = np.full((height, width, channels), background_fill, dtype=np.float64)
    mask = np.zeros((height, width, 1), dtype=np.float64)
    boxes: list[GtBox] = []
    placed: list[tuple[int, int, int, int]] = []
    gen = rng.stream(seed, rng.DOMAIN_PLACEMENT)
    for sprite in sprites:
        h, w, c = sprite.template.shape
        if h >= height or w >= width:
            raise DimensionError(
                f"sprite {h}x{w} does not fit strictly inside canvas {height}x{width}")
        if c != channels:
            raise DimensionError(
                f"sprite has {c} channels, canvas has {channels}")
        for attempt in range(1000):
            top = _sample_position(gen, height - h, place_align, place_offset)
            left = _sample_position(gen, width - w, place_align, place_offset)
            if not any(_overlaps((top, left, h, w), p) for p in placed):
                break
        else:
            raise CapacityError(
                f"could not place sprite after 1000 attempts on {height}x{width}")
        image[top:top + h, left:left + w, :] = sprite.template
        mask[top:top + h, left:left + w, 0] = sprite.coverage
        placed.append((top, left, h, w))
        rows = np.flatnonzero(sprite.coverage.any(axis=1))
        cols = np.flatnonzero(sprite.coverage.any(axis=0))
        boxes.append(GtBox(x1=left + int(cols[0]), y1=top + int(rows[0]),
                           x2=left + int(cols[-1]) + 1, y2=top + int(rows[-1]) + 1,
                           class_id=sprite.class_id))
    return Scene(image=freeze(image), object_mask=freeze(mask), ground_truth=boxes)


def background_mask(scene: Scene, channels: int) -> np.ndarray:
    """M_bg = 1 - M_objs, replicated across channels."""
    return expand_mask(1.0 - scene.object_mask, channels)


def compose_adversarial(scene: Scene, perturbation: np.ndarray) -> np.ndarray:
    """image * M_objs + perturbation * M_bg."""
    if perturbation.shape != scene.image.shape:
        raise DimensionError(
            f"perturbation {perturbation.shape} vs scene {scene.image.shape}")
    channels = scene.image.shape[2]
    m_objs = expand_mask(scene.object_mask, channels)
    return lincomb(1.0, hadamard(scene.image, m_objs),
                   1.0, hadamard(perturbation, 1.0 - m_objs))


@dataclass(frozen=True)
class PhysicalAdaptation:
    contrast_range: tuple[float, float] = (0.8, 1.2)
    brightness_range: tuple[float, float] = (-0.1, 0.1)
    noise_sigma: float = 0.01
    rng_seed: int = 0

    def __post_init__(self):
        if self.contrast_range[0] > self.contrast_range[1]:
            raise ConfigError("contrast range lo > hi")
        if self.contrast_range[0] <= 0.0:
            raise ConfigError("contrast must be positive")
        if self.brightness_range[0] > self.brightness_range[1]:
            raise ConfigError("brightness range lo > hi")
        if self.noise_sigma < 0.0:
            raise ConfigError("noise_sigma must be >= 0")


IDENTITY_PA = PhysicalAdaptation(contrast_range=(1.0, 1.0),
                                 brightness_range=(0.0, 0.0),
                                 noise_sigma=0.0, rng_seed=0)


@dataclass(frozen=True)
class PaJacobianInfo:
    contrast: float
    active: np.ndarray  # True where the clamp did not saturate

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        """d out / d image is `contrast` on active pixels, 0 on clamped ones."""
        if upstream.shape != self.active.shape:
            raise DimensionError(
                f"PA backward: {upstream.shape} vs {self.active.shape}")
        return np.where(self.active, self.contrast * upstream, 0.0)


def apply_pa(pa: PhysicalAdaptation, image: np.ndarray,
             iteration: int) -> tuple[np.ndarray, PaJacobianInfo]:
    """clamp01(c*image + b + noise) with draws keyed by (rng_seed, iteration).

    The same (seed, iteration) pair always produces the same transform, so
    one adaptation per optimizer step is shared by every scene in a batch.
    """
    gen = rng.stream(pa.rng_seed, rng.DOMAIN_PA, iteration)
    contrast = float(gen.uniform(*pa.contrast_range))
    brightness = float(gen.uniform(*pa.brightness_range))
    pre = contrast * image + brightness
    if pa.noise_sigma > 0.0:
        pre = pre + gen.normal(0.0, pa.noise_sigma, size=image.shape)
    out = clamp01(pre)
    active = (pre > 0.0) & (pre < 1.0)
    return out, PaJacobianInfo(contrast=contrast, active=active)


def make_dataset(base_seed: int, count: int, sprites: list[Sprite],
                 canvas: tuple[int, int, int], background_fill: float = 0.5,
                 place_align: int = 1, place_offset: int = 0) -> list[Scene]:
    """Scenes for seeds base_seed..base_seed+count-1."""
    return [generate_scene(base_seed + k, sprites, canvas, background_fill,
                           place_align, place_offset)
            for k in range(count)]
