"""AMSGrad with bias correction, plus polynomially decayed learning rates.

Update for gradient g at step t (1-based):

    m <- b1*m + (1-b1)*g
    v <- b2*v + (1-b2)*g^2
    m_hat = m / (1 - b1^t)
    v_hat <- max(v_hat, v / (1 - b2^t))      elementwise, never decreases
    p <- p - lr * m_hat / (sqrt(v_hat) + eps)

The maximum is taken over the bias-corrected second moment.  The optimizer
never projects; clamping to the feasible box is the attack loop's job, so
this stays reusable on unconstrained problems.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError, ContractError, DimensionError


@dataclass
class AmsGradState:
    m: np.ndarray
    v: np.ndarray
    v_hat: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @staticmethod
    def init(dims, beta1: float = 0.9, beta2: float = 0.999,
             eps: float = 1e-8) -> "AmsGradState":
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ConfigError(f"betas must lie in [0, 1), got {beta1}, {beta2}")
        if eps <= 0.0:
            raise ConfigError(f"eps must be > 0, got {eps}")
        return AmsGradState(m=np.zeros(dims), v=np.zeros(dims),
                            v_hat=np.zeros(dims), t=0,
                            beta1=beta1, beta2=beta2, eps=eps)


def step(state: AmsGradState, p: np.ndarray, grad: np.ndarray,
         lr: float) -> np.ndarray:
    """Advance the state by one gradient and return the updated parameters."""
    if state.m.shape != p.shape or grad.shape != p.shape:
        raise DimensionError(
            f"step: state {state.m.shape}, p {p.shape}, grad {grad.shape} disagree")
    if lr <= 0.0:
        raise ConfigError(f"learning rate must be > 0, got {lr}")
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad ** 2
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    state.v_hat = np.maximum(state.v_hat, state.v / (1.0 - state.beta2 ** state.t))
    return p - lr * m_hat / (np.sqrt(state.v_hat) + state.eps)


class LrMode(Enum):
    CONSTANT = "constant"
    POLY_DECAY = "poly"


@dataclass(frozen=True)
class LrSchedule:
    alpha0: float = 0.03
    exponent: float = 0.5
    mode: LrMode = LrMode.CONSTANT

    def __post_init__(self):
        if self.alpha0 <= 0.0:
            raise ConfigError(f"alpha0 must be > 0, got {self.alpha0}")
        if not 0.0 <= self.exponent <= 1.0:
            raise ConfigError(f"exponent must lie in [0, 1], got {self.exponent}")


def lr_at(schedule: LrSchedule, t: int) -> float:
    """Learning rate at 1-based step t: alpha0 (constant) or alpha0 / t^e."""
    if t < 1:
        raise ContractError(f"step index must be >= 1, got {t}")
    if schedule.mode is LrMode.CONSTANT:
        return schedule.alpha0
    return schedule.alpha0 * float(t) ** (-schedule.exponent)
