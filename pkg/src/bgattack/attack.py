"""End-to-end perturbation synthesis over a scene dataset.

Per optimizer step: (optional ensemble recombination) -> physical
adaptation -> background composition per scene -> losses -> batch-summed
gradient -> AMSGrad step -> projection onto [0,1].  One optimizer step per
batch; an epoch is one full pass over the dataset with a seeded shuffle and
contiguous batches.

With the ensemble enabled, the first half of the epochs trains the
checkerboard half of the grid against the primary detector while the
complement is held at the initial perturbation; the second half trains the
complement against the second detector.  In the default preserving mode the
phase-2 recombination anchor is the phase-1 result, so phase-1 progress
survives; the literal mode re-anchors at the initial perturbation, exactly
replaying the recombination equations as written.  The batch gradient is
masked to the active half before the optimizer step, so the inactive half
never accumulates optimizer-state drift.

The per-iteration squared gradient norm is the single-sample estimate of
the expected squared gradient; its running minimum is the convergence
statistic whose decay certifies convergence.
"""

import json
import math
import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import rng
from .errors import BgAttackError, ConfigError, DataError, DimensionError
from .losses import LossWeights, grad_total
from .masks import (Phase, boundary_indices, build_grid_masks,
                    ensemble_recombine, expand_mask)
from .optimizer import AmsGradState, LrSchedule, lr_at
from .optimizer import step as amsgrad_step
from .scene import PhysicalAdaptation, Scene
from .tensor import clamp01

_REPLICA_SHIFT = 32  # PA stream key: (replica << 32) | iteration


class PhaseMode(Enum):
    PRESERVE = "preserve"
    LITERAL = "literal"


@dataclass(frozen=True)
class EnsembleConfig:
    grid_n: int = 4
    phase_mode: PhaseMode = PhaseMode.PRESERVE
    model_b: object | None = None  # second (forward, vjp) detector


@dataclass(frozen=True)
class AttackConfig:
    epochs: int = 50
    batch_size: int = 2
    loss_weights: LossWeights = field(default_factory=LossWeights)
    schedule: LrSchedule = field(default_factory=LrSchedule)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    ensemble: EnsembleConfig | None = None
    pa: PhysicalAdaptation = field(default_factory=PhysicalAdaptation)
    seed: int = 0
    checkpoint_every: int = 0          # epochs between checkpoints, 0 = off
    checkpoint_dir: str | None = None
    grad_norm_replicates: int = 1

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.grad_norm_replicates < 1:
            raise ConfigError("grad_norm_replicates must be >= 1")


@dataclass(frozen=True)
class IterRecord:
    t: int
    l_obj: float
    l_box: float
    l_tv: float
    total: float
    grad_sq_norm: float
    e_of_t: float
    lr: float


@dataclass
class ConvergenceTrace:
    records: list[IterRecord] = field(default_factory=list)
    epochs: int = 0

    def append(self, **kw) -> None:
        prev = self.records[-1].e_of_t if self.records else math.inf
        self.records.append(IterRecord(e_of_t=min(prev, kw["grad_sq_norm"]), **kw))

    @property
    def e_of_t(self) -> list[float]:
        return [r.e_of_t for r in self.records]

    def epoch_mean_total(self) -> list[float]:
        """Mean per-iteration total loss per epoch (iteration count is
        constant across epochs for a fixed dataset and batch size)."""
        per = len(self.records) // self.epochs
        return [float(np.mean([r.total for r in self.records[e * per:(e + 1) * per]]))
                for e in range(self.epochs)]


def random_init(dims, seed: int) -> np.ndarray:
    """Uniform [0, 1) perturbation from the counter-based stream."""
    return rng.stream(seed, rng.DOMAIN_INIT).random(dims)


def _batch_gradient(batch: list[Scene], p: np.ndarray, det, cfg: AttackConfig,
                    pa_iteration: int, row_b, col_b):
    """Batch-summed losses and gradient (losses sum, they do not average)."""
    g = np.zeros_like(p)
    sums = {"l_obj": 0.0, "l_box": 0.0, "l_tv": 0.0, "total": 0.0}
    for scn in batch:
        br = grad_total(scn, p, det, cfg.pa, cfg.loss_weights, pa_iteration,
                        row_b, col_b)
        g += br.grad_p
        sums["l_obj"] += br.l_obj
        sums["l_box"] += br.l_box
        sums["l_tv"] += br.l_tv
        sums["total"] += br.total
    return g, sums


def run_attack(cfg: AttackConfig, dataset: list[Scene], det,
               p0: np.ndarray) -> tuple[np.ndarray, ConvergenceTrace]:
    """Optimize a universal background perturbation over the dataset.

    Fully deterministic given (cfg.seed, dataset, det, p0).  Returns the
    final perturbation and the per-iteration convergence trace.
    """
    if not dataset:
        raise ConfigError("dataset must be non-empty")
    for scn in dataset:
        if scn.image.shape != p0.shape:
            raise DimensionError(
                f"scene {scn.image.shape} vs perturbation {p0.shape}")
    if p0.min() < 0.0 or p0.max() > 1.0:
        raise ConfigError("initial perturbation must lie in [0, 1]")

    channels = p0.shape[2]
    pair = active_mask = row_b = col_b = None
    phase_split = cfg.epochs  # first epoch index of phase 2
    if cfg.ensemble is not None:
        pair = build_grid_masks(p0.shape[0], p0.shape[1], cfg.ensemble.grid_n)
        row_b = boundary_indices(pair, "row")
        col_b = boundary_indices(pair, "col")
        phase_split = (cfg.epochs + 1) // 2
    else:
        row_b, col_b = (), ()

    p = p0.copy()
    anchor = p0.copy()
    phase = Phase.GRID_ACTIVE
    active_det = det
    state = AmsGradState.init(p0.shape, cfg.beta1, cfg.beta2, cfg.eps)
    trace = ConvergenceTrace(epochs=cfg.epochs)
    n = len(dataset)
    t = 0

    for epoch in range(1, cfg.epochs + 1):
        if cfg.ensemble is not None:
            if epoch - 1 < phase_split:
                phase, active_det = Phase.GRID_ACTIVE, det
            elif epoch - 1 == phase_split:
                phase = Phase.REVERSED_ACTIVE
                active_det = cfg.ensemble.model_b or det
                if cfg.ensemble.phase_mode is PhaseMode.PRESERVE:
                    anchor = p.copy()
            active_mask = expand_mask(
                pair.grid if phase is Phase.GRID_ACTIVE else pair.reversed_,
                channels)
        order = rng.stream(cfg.seed, rng.DOMAIN_SHUFFLE, epoch).permutation(n)
        for start in range(0, n, cfg.batch_size):
            t += 1
            batch = [dataset[i] for i in order[start:start + cfg.batch_size]]
            try:
                if cfg.ensemble is not None:
                    p = ensemble_recombine(p, anchor, pair, phase)
                g, sums = _batch_gradient(batch, p, active_det, cfg, t,
                                          row_b, col_b)
                if cfg.ensemble is not None:
                    g = g * active_mask
                gsq = float((g * g).sum())
                if cfg.grad_norm_replicates > 1:
                    acc = gsq
                    for r in range(1, cfg.grad_norm_replicates):
                        gr, _ = _batch_gradient(
                            batch, p, active_det, cfg,
                            (r << _REPLICA_SHIFT) | t, row_b, col_b)
                        if cfg.ensemble is not None:
                            gr = gr * active_mask
                        acc += float((gr * gr).sum())
                    gsq = acc / cfg.grad_norm_replicates
                lr = lr_at(cfg.schedule, t)
                stepped = clamp01(amsgrad_step(state, p, g, lr))
                if cfg.ensemble is not None:
                    # stale momentum must not drift the inactive half
                    p = p + (stepped - p) * active_mask
                else:
                    p = stepped
            except BgAttackError as exc:
                raise type(exc)(f"iteration {t}: {exc}") from exc
            trace.append(t=t, grad_sq_norm=gsq, lr=lr, **sums)
        if (cfg.checkpoint_every > 0 and cfg.checkpoint_dir is not None
                and epoch % cfg.checkpoint_every == 0):
            _write_checkpoint(cfg.checkpoint_dir, epoch, p, state)
    return p, trace


def _write_checkpoint(out_dir: str, epoch: int, p: np.ndarray,
                      state: AmsGradState) -> None:
    from .io import write_tensor
    d = os.path.join(out_dir, f"checkpoint_{epoch:04d}")
    os.makedirs(d, exist_ok=True)
    write_tensor(os.path.join(d, "P.f32t"), p)
    write_tensor(os.path.join(d, "m.f32t"), state.m)
    write_tensor(os.path.join(d, "v.f32t"), state.v)
    write_tensor(os.path.join(d, "v_hat.f32t"), state.v_hat)
    meta = {"t": state.t, "beta1": state.beta1, "beta2": state.beta2,
            "eps": state.eps, "epoch": epoch}
    with open(os.path.join(d, "state.json"), "w") as fh:
        json.dump(meta, fh, indent=1)


def fit_convergence_slope(trace: ConvergenceTrace, burn_in: int = 0) -> float:
    """OLS slope of log(min-so-far squared gradient norm) against log(t).

    A negative slope indicates decay consistent with convergence; a
    synthetic c/sqrt(t) trace fits -0.5, c/t fits -1.
    """
    pts = [(r.t, r.e_of_t) for r in trace.records if r.t > burn_in]
    if len(pts) <= 10:
        raise DataError(
            f"need more than burn_in+10 iterations, have {len(trace.records)} "
            f"with burn_in {burn_in}")
    if any(e <= 0.0 for _, e in pts):
        raise DataError("convergence statistic must stay positive to fit a slope")
    x = np.log([t for t, _ in pts])
    y = np.log([e for _, e in pts])
    xc = x - x.mean()
    return float((xc @ (y - y.mean())) / (xc @ xc))
