"""Bias-corrected ADAM on flat parameter vectors."""

from dataclasses import dataclass

import numpy as np

from .mathcore import ShapeError


@dataclass(frozen=True)
class AdamConfig:
    learn_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.learn_rate > 0:
            raise ValueError("learn_rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n), 0)

    def copy(self):
        return AdamState(self.m.copy(), self.v.copy(), self.t)


def adam_step(state: AdamState, grad, cfg: AdamConfig):
    """Return (new_state, update); the caller adds ``update`` to its parameters."""
    g = np.asarray(grad, dtype=np.float64)
    if g.shape != state.m.shape:
        raise ShapeError(f"gradient length {g.shape} does not match state {state.m.shape}")
    t = state.t + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * (g * g)
    m_hat = m / (1.0 - cfg.beta1 ** t)
    v_hat = v / (1.0 - cfg.beta2 ** t)
    update = -cfg.learn_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    return AdamState(m, v, t), update
