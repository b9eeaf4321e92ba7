"""Central finite-difference checking of every analytic gradient.

The checker only ever evaluates scalar losses; it never touches the
analytic backward paths it validates.  Errors are reported per element as

    |analytic - fd| / (|fd| + 1e-12)

with fd the central difference (f(x+h) - f(x-h)) / 2h at step 1e-6 in
64-bit.

A 64-bit central difference carries cancellation noise of roughly
ulp(f)/2h.  A pixel whose true derivative sits below that floor tells us
nothing about correctness, so instances are conditioned: detector templates
keep their objectness head dominant (no pixel weight can cancel to zero),
and smoothness-loss inputs are nudged away from the rare configurations
whose measured difference quotient falls under the floor.
"""

import numpy as np

from .detector import ToyGridDetector, UpstreamGrad
from .losses import (BidirAnchor, LossWeights, TvMode, box_loss, grad_total,
                     objectness_loss, tv_loss)
from .scene import IDENTITY_PA, generate_scene, make_sprite

DEFAULT_STEP = 1e-6


def central_difference(f, x: np.ndarray, step: float = DEFAULT_STEP) -> np.ndarray:
    """Per-element central finite difference of a scalar function."""
    grad = np.zeros(x.shape)
    flat = grad.reshape(-1)
    for i in range(x.size):
        xp = x.copy().reshape(-1)
        xm = x.copy().reshape(-1)
        xp[i] += step
        xm[i] -= step
        flat[i] = (f(xp.reshape(x.shape)) - f(xm.reshape(x.shape))) / (2.0 * step)
    return grad


def max_rel_error(analytic: np.ndarray, fd: np.ndarray) -> float:
    return float((np.abs(analytic - fd) / (np.abs(fd) + 1e-12)).max())


def _noise_floor(f_value: float, step: float = DEFAULT_STEP) -> float:
    """Smallest |derivative| the 64-bit difference quotient can resolve to
    ~2e-6 relative error."""
    return max(abs(f_value), 1.0) * np.finfo(np.float64).eps / (2.0 * step) / 2e-6


def conditioned_fd(f, x: np.ndarray, rounds: int = 8):
    """Finite-difference gradient on an input nudged until no element's
    difference quotient drowns in rounding noise."""
    floor = _noise_floor(f(x))
    for _ in range(rounds):
        fd = central_difference(f, x)
        bad = np.abs(fd) < floor
        if not bad.any():
            return x, fd
        x = x.copy()
        x[bad] = np.where(x[bad] > 0.5, x[bad] - 0.023, x[bad] + 0.023)
    return x, central_difference(f, x)


def _instance(size: int, seed: int):
    """Random instance whose objectness template dominates the per-pixel
    weights, keeping every detector-loss gradient off the noise floor."""
    sprite = make_sprite("disk", max(4, size // 3), class_id=0)
    scn = generate_scene(seed, [sprite], (size, size, 3), background_fill=0.5)
    s = size // 2
    gen = np.random.default_rng(seed)
    # signed-uniform objectness weights cannot cancel to zero at a pixel;
    # keeping them modest also keeps cells out of sigmoid saturation
    w_obj = gen.choice([-1.0, 1.0], (s, s, 3)) * gen.uniform(0.1, 0.25, (s, s, 3))
    det = ToyGridDetector(
        cell_size=s, num_classes=3,
        w_obj=w_obj,
        w_box=gen.normal(0.0, 0.02, (4, s, s, 3)),
        w_cls=gen.normal(0.0, 0.02, (3, s, s, 3)),
        b_obj=float(gen.normal(0.0, 0.1)),
        b_box=np.zeros(4), b_cls=np.zeros(3))
    p = np.random.default_rng(seed + 1).uniform(0.05, 0.95, (size, size, 3))
    return scn, det, p


def check_objectness(size: int = 16, seed: int = 7) -> float:
    """VJP of the objectness loss against finite differences on the image."""
    _, det, img = _instance(size, seed)

    def f(x):
        return objectness_loss(det.forward(x))[0]

    img, fd = conditioned_fd(f, img)
    _, upstream = objectness_loss(det.forward(img))
    analytic = det.vjp(img, upstream)
    return max_rel_error(analytic, fd)


def check_box(size: int = 16, seed: int = 7) -> float:
    _, det, img = _instance(size, seed)

    def f(x):
        return box_loss(det.forward(x))[0]

    img, fd = conditioned_fd(f, img)
    _, upstream = box_loss(det.forward(img))
    analytic = det.vjp(img, upstream)
    return max_rel_error(analytic, fd)


def check_tv(mode: TvMode, size: int = 16, seed: int = 7,
             anchor: BidirAnchor = BidirAnchor.SUCCESSOR) -> float:
    _, _, p = _instance(size, seed)
    weights = LossWeights(tv_mode=mode, bidir_anchor=anchor)
    bounds = [size // 4, size // 2, 3 * size // 4]

    def f(x):
        return tv_loss(x, weights, bounds, bounds)[0]

    p, fd = conditioned_fd(f, p)
    analytic = tv_loss(p, weights, bounds, bounds)[1]
    return max_rel_error(analytic, fd)


def check_grad_total(size: int = 16, seed: int = 7) -> float:
    """Full chain at library-default weights, identity physical adaptation."""
    scn, det, p = _instance(size, seed)
    weights = LossWeights()
    bounds = [size // 2]

    def f(x):
        return grad_total(scn, x, det, IDENTITY_PA, weights, 1,
                          bounds, bounds).total

    p, fd = conditioned_fd(f, p)
    analytic = grad_total(scn, p, det, IDENTITY_PA, weights, 1,
                          bounds, bounds).grad_p
    return max_rel_error(analytic, fd)


def check_detector_probe(size: int = 16, seed: int = 7) -> float:
    """A probe loss touching every detection field, class probs included."""
    _, det, img = _instance(size, seed)
    gen = np.random.default_rng(seed + 2)
    n_cells = (size // det.cell_size) ** 2
    # objectness coefficients bounded away from zero keep the dominant-head
    # property; box coordinates are O(cell), so their coefficients are scaled
    coeff = [(float(gen.choice([-1.0, 1.0]) * gen.uniform(0.5, 1.5)),
              gen.normal(size=4) / size,
              gen.normal(size=det.num_classes))
             for _ in range(n_cells)]

    def f(x):
        ds = det.forward(x)
        total = 0.0
        for d, (co, cb, cc) in zip(ds.detections, coeff):
            total += co * d.objectness + float(cb @ np.array(d.box))
            total += float(cc @ d.class_probs)
        return total

    img, fd = conditioned_fd(f, img)
    upstream = [UpstreamGrad(d_objectness=co, d_box=cb, d_class=cc)
                for co, cb, cc in coeff]
    analytic = det.vjp(img, upstream)
    return max_rel_error(analytic, fd)


def run_all(size: int = 16, seed: int = 7) -> dict[str, float]:
    return {
        "l_obj": check_objectness(size, seed),
        "l_box": check_box(size, seed),
        "l_tv_plain": check_tv(TvMode.PLAIN, size, seed),
        "l_tv_adaptive": check_tv(TvMode.ADAPTIVE, size, seed),
        "l_tv_bidirectional": check_tv(TvMode.ADAPTIVE_BIDIRECTIONAL, size, seed),
        "grad_total": check_grad_total(size, seed),
        "detector_probe": check_detector_probe(size, seed),
    }
