"""Residual weights for the response and per-input sensitivity losses.

Weights are ordered (response, sens_1, ..., sens_n). Modes:

     1  min L            2  max L
     3  min |grad L|     4  max |grad L|
     5  min Var(lam_i E_i)
     6  min sum_i (1 - cos(grad L, lam_i g_i))
     7  min sum_i cos(grad L, lam_i g_i)^2
     8  min sum_j (1 - cos(lam_R g_R, lam_j g_j))
     9  min sum_j cos(lam_R g_R, lam_j g_j)^2
    10  fixed (1, 1, ..., 1)
    11  fixed (1, 0, ..., 0)
    12  sensitivity weights decayed each epoch
    13  sensitivity weights grown each epoch

Adaptive modes (1-9) keep an unconstrained ``raw`` vector updated with ADAM and
map it through ``clamp_map`` into (eps0, 2 + eps0). Here ``g_i`` is the
unweighted gradient of loss term i and grad L = sum_i lam_i g_i.

Modes 8 and 9 are positively homogeneous of degree 0 in every weight, so their
lambda-gradient vanishes and the weights stay where they start.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .mathcore import cosine_similarity, erfc
from .optim import AdamConfig, AdamState, adam_step

ADAPTIVE_MODES = tuple(range(1, 10))
FIXED_MODES = (10, 11)
SCHEDULED_MODES = (12, 13)
ALL_MODES = tuple(range(1, 14))

MODE_NAMES = {
    1: "min L",
    2: "max L",
    3: "min |grad L|",
    4: "max |grad L|",
    5: "min Var",
    6: "min cosine distance to total",
    7: "min squared cosine to total",
    8: "min cosine distance to response",
    9: "min squared cosine to response",
    10: "SNN",
    11: "basic ANN",
    12: "SNN exp. decay",
    13: "SNN exp. increase",
}

EPSILON0 = 0.01
CLAMP_CENTER = 1.2
CLAMP_SCALE = math.sqrt(3.0)
RAW_INIT = CLAMP_CENTER
FD_STEP = 1e-6


class ModeError(ValueError):
    pass


def check_mode(mode):
    if isinstance(mode, bool) or int(mode) != mode or int(mode) not in ALL_MODES:
        raise ModeError(f"mode must be an integer in 1..13, got {mode!r}")
    return int(mode)


def clamp_map(raw, eps0=EPSILON0):
    """lam = 1 - erf((1.2 - raw)/sqrt(3)) + eps0, evaluated as erfc for accuracy."""
    raw = np.asarray(raw, dtype=np.float64)
    out = np.array([erfc((CLAMP_CENTER - r) / CLAMP_SCALE) for r in raw.ravel()]) + eps0
    return out.reshape(raw.shape)


def clamp_derivative(raw):
    raw = np.asarray(raw, dtype=np.float64)
    return 2.0 / math.sqrt(3.0 * math.pi) * np.exp(-((CLAMP_CENTER - raw) ** 2) / 3.0)


@dataclass(frozen=True)
class ResidualWeightState:
    raw: np.ndarray
    clamped: np.ndarray
    mode: int
    epsilon0: float = EPSILON0
    schedule_rate: float = 0.01
    optimizer_moments: AdamState | None = None


@dataclass(frozen=True)
class WeightingContext:
    loss_components: np.ndarray  # (K,)
    per_loss_grads: np.ndarray   # (K, P)

    def total_grad(self, lam):
        return np.asarray(lam) @ self.per_loss_grads


def initial_state(mode, n_in, eps0=EPSILON0, schedule_rate=0.01) -> ResidualWeightState:
    mode = check_mode(mode)
    k = 1 + n_in
    if mode in ADAPTIVE_MODES:
        raw = np.full(k, RAW_INIT)
        return ResidualWeightState(raw, clamp_map(raw, eps0), mode, eps0, schedule_rate,
                                   AdamState.zeros(k))
    if mode in FIXED_MODES:
        return fixed_state(mode, n_in, eps0)
    if mode == 12:
        lam = np.ones(k)
    else:
        # zero initial weights cannot grow multiplicatively; start sensitivities at eps0
        lam = np.concatenate([[1.0], np.full(n_in, eps0)])
    return ResidualWeightState(lam.copy(), lam, mode, eps0, schedule_rate)


def fixed_state(mode, n_in=2, eps0=EPSILON0) -> ResidualWeightState:
    mode = check_mode(mode)
    if mode == 10:
        lam = np.ones(1 + n_in)
    elif mode == 11:
        lam = np.concatenate([[1.0], np.zeros(n_in)])
    else:
        raise ModeError(f"mode {mode} is not a fixed mode")
    return ResidualWeightState(lam.copy(), lam, mode, eps0)


def _cos_terms(ref, grads, lam, idx):
    return np.array([cosine_similarity(ref, lam[i] * grads[i]) for i in idx])


def objective(mode, ctx: WeightingContext, lam):
    lam = np.asarray(lam, dtype=np.float64)
    E = ctx.loss_components
    G = ctx.per_loss_grads
    if mode in (1, 2):
        val = float(np.dot(lam, E))
        return val if mode == 1 else -val
    if mode in (3, 4):
        total = lam @ G
        val = float(np.sqrt(np.dot(total, total)))
        return val if mode == 3 else -val
    if mode == 5:
        return float(np.var(lam * E))
    if mode in (6, 7):
        c = _cos_terms(lam @ G, G, lam, range(len(lam)))
        return float(np.sum(1.0 - c)) if mode == 6 else float(np.sum(c * c))
    if mode in (8, 9):
        c = _cos_terms(lam[0] * G[0], G, lam, range(1, len(lam)))
        return float(np.sum(1.0 - c)) if mode == 8 else float(np.sum(c * c))
    raise ModeError(f"mode {mode!r} has no weighting objective")


def lambda_gradient(mode, ctx: WeightingContext, state: ResidualWeightState, h=FD_STEP):
    """d objective / d raw via central differences in the clamped weights."""
    lam = state.clamped
    grad = np.empty_like(lam)
    for i in range(lam.size):
        up = lam.copy()
        dn = lam.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (objective(mode, ctx, up) - objective(mode, ctx, dn)) / (2.0 * h)
    return grad * clamp_derivative(state.raw)


def analytic_lambda_gradient(mode, ctx: WeightingContext, state: ResidualWeightState):
    """Closed-form d objective / d raw for modes 1-4 (used to cross-check FD)."""
    lam = state.clamped
    if mode in (1, 2):
        g = ctx.loss_components.copy()
    elif mode in (3, 4):
        total = lam @ ctx.per_loss_grads
        g = ctx.per_loss_grads @ total / np.linalg.norm(total)
    else:
        raise ModeError(f"no closed-form lambda gradient for mode {mode}")
    if mode in (2, 4):
        g = -g
    return g * clamp_derivative(state.raw)


def update_adaptive(state: ResidualWeightState, ctx: WeightingContext, adam_config=AdamConfig()):
    if state.mode not in ADAPTIVE_MODES:
        raise ModeError(f"mode {state.mode} is not adaptive")
    grad = lambda_gradient(state.mode, ctx, state)
    moments, step = adam_step(state.optimizer_moments, grad, adam_config)
    raw = state.raw + step
    return replace(state, raw=raw, clamped=clamp_map(raw, state.epsilon0), optimizer_moments=moments)


def update_scheduled(state: ResidualWeightState, epoch):
    """Apply the per-epoch decay (12) or growth (13) to the sensitivity weights."""
    if state.mode not in SCHEDULED_MODES:
        raise ModeError(f"mode {state.mode} is not scheduled")
    factor = 1.0 + state.schedule_rate * epoch
    lam = state.clamped.copy()
    if state.mode == 12:
        lam[1:] = lam[1:] / factor
    else:
        lam[1:] = lam[1:] * factor
    return replace(state, raw=lam.copy(), clamped=lam)
