"""Attack losses and their analytic gradients.

Adversarial part:

    L_obj = (1/N_c) sum_j (1/N_cj) sum_i s_ji
    L_box = (1/N_c) sum_j (1/N_cj) sum_i s_ji * (|x2-x1| + |y2-y1|)

where detections are grouped by their argmax class, N_c is the number of
distinct classes present and N_cj the count within class j.  The grouping
is combinatorial and treated as constant; gradients flow only through the
objectness scores and box coordinates.

Smoothness part: squared adjacent-pixel differences, optionally weighted by
distance to patch-integration boundaries so seams between ensembled patches
are smoothed harder.  The weight at index i, with d = distance to the
nearest boundary, is

    w(i) = delta          if d == 0
         = delta/(d+eps)  if 0 < d < delta
         = 1              if d >= delta

The bi-directional variant adds the reversed difference of each pair.  With
both directions anchored at the same index it is algebraically exactly twice
the one-directional loss; anchoring the reversed term at the successor index
(the default) breaks that symmetry so the two sides of a seam are pulled
together instead of one-sidedly.

Total:  L = L_obj + eta * L_tv + lambda * L_box,  with the gradient chained
through the detector VJP, the background mask, and the physical-adaptation
Jacobian; the smoothness gradient is taken on the raw perturbation.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .detector import DetectionSet, UpstreamGrad
from .errors import ConfigError, DimensionError
from .scene import (PhysicalAdaptation, Scene, apply_pa, background_mask,
                    compose_adversarial)


class TvMode(Enum):
    PLAIN = "plain"
    ADAPTIVE = "adaptive"
    ADAPTIVE_BIDIRECTIONAL = "bidirectional"


class BidirAnchor(Enum):
    LITERAL = "literal"      # reversed term weighted at the same index
    SUCCESSOR = "successor"  # reversed term weighted at the next index


@dataclass(frozen=True)
class LossWeights:
    eta: float = 9.0
    lam: float = 0.01
    delta: int = 4
    eps_w: float = 1e-8
    tv_mode: TvMode = TvMode.ADAPTIVE_BIDIRECTIONAL
    bidir_anchor: BidirAnchor = BidirAnchor.SUCCESSOR

    def __post_init__(self):
        if not np.isfinite(self.eta) or self.eta < 0.0:
            raise ConfigError(f"eta must be finite and >= 0, got {self.eta}")
        if not np.isfinite(self.lam) or self.lam < 0.0:
            raise ConfigError(f"lambda must be finite and >= 0, got {self.lam}")
        if self.delta < 1:
            raise ConfigError(f"delta must be >= 1, got {self.delta}")
        if self.eps_w <= 0.0:
            raise ConfigError(f"eps_w must be > 0, got {self.eps_w}")


@dataclass(frozen=True)
class LossBreakdown:
    l_obj: float
    l_box: float
    l_tv: float
    total: float
    grad_p: np.ndarray


def _class_groups(ds: DetectionSet) -> dict[int, list[int]]:
    groups: dict[int, list[int]] = {}
    for idx, det in enumerate(ds.detections):
        cls = int(np.argmax(det.class_probs))
        groups.setdefault(cls, []).append(idx)
    return groups


def objectness_loss(ds: DetectionSet) -> tuple[float, list[UpstreamGrad]]:
    """Mean-of-class-means of objectness scores.

    An empty detection set is the attack's success state and contributes
    zero loss with no gradient.
    """
    groups = _class_groups(ds)
    if not groups:
        return 0.0, []
    n_c = len(groups)
    loss = 0.0
    d_obj = [0.0] * len(ds.detections)
    for members in groups.values():
        n_cj = len(members)
        for idx in members:
            loss += ds.detections[idx].objectness / (n_c * n_cj)
            d_obj[idx] = 1.0 / (n_c * n_cj)
    return loss, [UpstreamGrad(d_objectness=g) for g in d_obj]


def box_loss(ds: DetectionSet) -> tuple[float, list[UpstreamGrad]]:
    """Width+height of each box weighted by its objectness, class-averaged.

    Boxes satisfy x1 < x2 and y1 < y2, so the absolute values have fixed
    sign and the coordinate gradients are +-s scaled by the grouping.
    """
    groups = _class_groups(ds)
    if not groups:
        return 0.0, []
    n_c = len(groups)
    loss = 0.0
    upstream = [None] * len(ds.detections)
    for members in groups.values():
        n_cj = len(members)
        scale = 1.0 / (n_c * n_cj)
        for idx in members:
            det = ds.detections[idx]
            x1, y1, x2, y2 = det.box
            extent = abs(x2 - x1) + abs(y2 - y1)
            loss += det.objectness * extent * scale
            s = det.objectness * scale
            upstream[idx] = UpstreamGrad(
                d_objectness=extent * scale,
                d_box=np.array([-s, -s, s, s]))
    return loss, upstream


def combine_upstream(up_obj: list[UpstreamGrad], up_box: list[UpstreamGrad],
                     lam: float) -> list[UpstreamGrad]:
    """Upstream gradients of L_obj + lambda * L_box."""
    return [UpstreamGrad(d_objectness=a.d_objectness + lam * b.d_objectness,
                         d_box=np.asarray(a.d_box) + lam * np.asarray(b.d_box))
            for a, b in zip(up_obj, up_box)]


def adaptive_weights(extent: int, boundaries, delta: int,
                     eps_w: float) -> np.ndarray:
    """Per-index smoothness weights governed by the nearest boundary."""
    bounds = np.asarray(list(boundaries), dtype=np.int64)
    if bounds.size and (bounds.min() <= 0 or bounds.max() >= extent):
        raise ConfigError(
            f"boundaries must lie strictly inside (0, {extent}), got {list(bounds)}")
    w = np.ones(extent, dtype=np.float64)
    if bounds.size == 0:
        return w
    dist = np.abs(np.arange(extent)[:, None] - bounds[None, :]).min(axis=1)
    near = (dist > 0) & (dist < delta)
    w[near] = delta / (dist[near] + eps_w)
    w[dist == 0] = float(delta)
    return w


def _pair_weights(w: np.ndarray, mode: TvMode, anchor: BidirAnchor) -> np.ndarray:
    """Combined weight for each adjacent pair (i, i+1) under the mode."""
    if mode is TvMode.PLAIN:
        return np.ones(w.size - 1)
    if mode is TvMode.ADAPTIVE:
        return w[:-1]
    if anchor is BidirAnchor.LITERAL:
        return 2.0 * w[:-1]
    return w[:-1] + w[1:]


def tv_loss(p: np.ndarray, weights: LossWeights,
            row_boundaries=(), col_boundaries=()) -> tuple[float, np.ndarray]:
    """Smoothness loss and its exact gradient w.r.t. every pixel.

    Channels are summed and the result is normalized by the adjacent-pair
    count, so the balance against the per-detection-averaged adversarial
    losses is independent of image size.  Without boundaries the adaptive
    weights are all 1, ADAPTIVE degenerates to PLAIN, and the
    bi-directional literal mode is exactly 2x PLAIN.
    """
    if p.ndim != 3:
        raise DimensionError(f"expected (H, W, C) tensor, got {p.shape}")
    height, width, channels = p.shape
    if height < 2 and width < 2:
        raise DimensionError(
            f"tv_loss needs at least one adjacent pixel pair, got {p.shape}")
    w_row = adaptive_weights(height, row_boundaries, weights.delta, weights.eps_w)
    w_col = adaptive_weights(width, col_boundaries, weights.delta, weights.eps_w)
    pairs = ((height - 1) * width + height * (width - 1)) * channels
    loss = 0.0
    grad = np.zeros_like(p)
    if height >= 2:
        dv = p[1:, :, :] - p[:-1, :, :]
        pw = _pair_weights(w_row, weights.tv_mode, weights.bidir_anchor)[:, None, None]
        loss += float((pw * dv ** 2).sum())
        t = 2.0 * pw * dv
        grad[1:, :, :] += t
        grad[:-1, :, :] -= t
    if width >= 2:
        dh = p[:, 1:, :] - p[:, :-1, :]
        pw = _pair_weights(w_col, weights.tv_mode, weights.bidir_anchor)[None, :, None]
        loss += float((pw * dh ** 2).sum())
        t = 2.0 * pw * dh
        grad[:, 1:, :] += t
        grad[:, :-1, :] -= t
    return loss / pairs, grad / pairs


def grad_total(scene: Scene, p: np.ndarray, det, pa: PhysicalAdaptation,
               weights: LossWeights, iteration: int,
               row_boundaries=(), col_boundaries=()) -> LossBreakdown:
    """Full forward/backward pass for one scene.

    Forward: PA -> background composition -> detector -> loss terms.
    Backward: upstream gradients through the detector VJP, masked by the
    background (object pixels receive exactly zero adversarial gradient),
    scaled by the PA Jacobian; the smoothness gradient is added on the raw
    perturbation.
    """
    p_pa, pa_jac = apply_pa(pa, p, iteration)
    x_star = compose_adversarial(scene, p_pa)
    ds = det.forward(x_star)
    l_obj, up_obj = objectness_loss(ds)
    l_box, up_box = box_loss(ds)
    if ds.detections:
        upstream = combine_upstream(up_obj, up_box, weights.lam)
        g_img = det.vjp(x_star, upstream)
        m_bg = background_mask(scene, p.shape[2])
        g_adv = pa_jac.backward(g_img * m_bg)
    else:
        g_adv = np.zeros_like(p)
    l_tv, g_tv = tv_loss(p, weights, row_boundaries, col_boundaries)
    total = l_obj + weights.eta * l_tv + weights.lam * l_box
    return LossBreakdown(l_obj=l_obj, l_box=l_box, l_tv=l_tv, total=total,
                         grad_p=g_adv + weights.eta * g_tv)
