"""One seeded training run."""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import weighting as wt
from .data import Dataset, MinibatchPlan, minibatches
from .loss import response_loss, sensitivity_loss_per_input, weighted_total
from .network import (
    NetworkShape,
    backprop,
    combine,
    forward,
    init_params,
    input_jacobian,
    per_loss_gradients,
)
from .optim import AdamConfig, AdamState, adam_step


class DivergenceError(RuntimeError):
    def __init__(self, iteration, message="non-finite loss"):
        self.iteration = iteration
        super().__init__(f"{message} at iteration {iteration}")


@dataclass(frozen=True)
class TrainConfig:
    shape: NetworkShape = NetworkShape((2, 5, 3, 3, 1))
    mode: int = 10
    epochs: int = 500
    adam_theta: AdamConfig = AdamConfig()
    adam_lambda: AdamConfig = AdamConfig()
    batch_size: int = 64
    seed: int = 0
    schedule_rate: float = 0.01
    epsilon0: float = wt.EPSILON0
    # validation error every `val_stride` iterations (1 = every iteration)
    val_stride: int = 1

    def __post_init__(self):
        wt.check_mode(self.mode)
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.val_stride < 1:
            raise ValueError("val_stride must be >= 1")


@dataclass
class RunTrace:
    weighted_loss: np.ndarray
    response_loss: np.ndarray
    sensitivity_loss: np.ndarray  # (iterations, n_in)
    lambdas: np.ndarray           # (iterations, 1 + n_in), weights used in that iteration
    val_l2: np.ndarray            # NaN where skipped by val_stride
    epoch_train_response: np.ndarray = field(default_factory=lambda: np.zeros(0))
    epoch_train_sensitivity: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    duration: float = 0.0

    def __len__(self):
        return self.weighted_loss.size

    @property
    def final_l2(self):
        done = self.val_l2[~np.isnan(self.val_l2)]
        return float(done[-1]) if done.size else math.nan

    @property
    def lowest_l2(self):
        done = self.val_l2[~np.isnan(self.val_l2)]
        return float(done.min()) if done.size else math.nan


def count_iterations(cfg: TrainConfig, n_train):
    return cfg.epochs * math.ceil(n_train / cfg.batch_size)


def _full_losses(params, d: Dataset):
    y_hat, cache = forward(params, d.x)
    J = input_jacobian(params, cache)
    return response_loss(y_hat, d.y), sensitivity_loss_per_input(J, d.dy)


def train(cfg: TrainConfig, train_set: Dataset, val_set: Dataset):
    if not (train_set.standardized and val_set.standardized):
        raise ValueError("train and validation sets must be standardized")
    if train_set.n_in != cfg.shape.n_in or train_set.n_out != cfg.shape.n_out:
        raise ValueError(
            f"data has {train_set.n_in} inputs / {train_set.n_out} outputs, "
            f"network is {cfg.shape.layer_sizes}"
        )
    # overflow on a diverging run is reported through DivergenceError instead
    with np.errstate(over="ignore", invalid="ignore"):
        return _train(cfg, train_set, val_set)


def _train(cfg, train_set, val_set):
    stats = val_set.stats
    started = time.perf_counter()

    params = init_params(cfg.shape, cfg.seed)
    theta_state = AdamState.zeros(cfg.shape.n_params)
    wstate = wt.initial_state(cfg.mode, cfg.shape.n_in, cfg.epsilon0, cfg.schedule_rate)
    adaptive = cfg.mode in wt.ADAPTIVE_MODES
    plan = MinibatchPlan(cfg.batch_size, cfg.seed)

    n_iter = count_iterations(cfg, len(train_set))
    n_in = cfg.shape.n_in
    w_loss = np.empty(n_iter)
    e_resp = np.empty(n_iter)
    e_sens = np.empty((n_iter, n_in))
    lams = np.empty((n_iter, 1 + n_in))
    val_l2 = np.full(n_iter, np.nan)
    ep_resp = np.empty(cfg.epochs)
    ep_sens = np.empty((cfg.epochs, n_in))

    y_val = val_set.y * stats.y_std + stats.y_mean
    y_val_norm = np.linalg.norm(y_val)

    it = 0
    for epoch in range(cfg.epochs):
        for idx in minibatches(len(train_set), plan, epoch):
            xb, yb, dyb = train_set.x[idx], train_set.y[idx], train_set.dy[idx]
            y_hat, cache = forward(params, xb)
            jac = input_jacobian(params, cache)
            resid_y = y_hat - yb
            resid_jac = jac - dyb
            lam = wstate.clamped
            parts = weighted_total(
                np.concatenate([[response_loss(y_hat, yb)], sensitivity_loss_per_input(jac, dyb)]),
                lam,
            )
            if not math.isfinite(parts.total_weighted):
                raise DivergenceError(it)

            if adaptive:
                grads = per_loss_gradients(params, cache, resid_y, resid_jac)
                total = combine(grads, lam)
            else:
                total = backprop(params, cache, resid_y, resid_jac, lam).flat
            theta_state, step = adam_step(theta_state, total, cfg.adam_theta)
            params.apply_update(step)

            if adaptive:
                ctx = wt.WeightingContext(parts.components, grads)
                wstate = wt.update_adaptive(wstate, ctx, cfg.adam_lambda)

            w_loss[it] = parts.total_weighted
            e_resp[it] = parts.response
            e_sens[it] = parts.sensitivity
            lams[it] = lam
            if it % cfg.val_stride == 0 or it == n_iter - 1:
                y_pred, _ = forward(params, val_set.x)
                y_pred = y_pred * stats.y_std + stats.y_mean
                val_l2[it] = np.linalg.norm(y_pred - y_val) / y_val_norm
            it += 1

        ep_resp[epoch], ep_sens[epoch] = _full_losses(params, train_set)
        if cfg.mode in wt.SCHEDULED_MODES:
            wstate = wt.update_scheduled(wstate, epoch + 1)

    trace = RunTrace(
        weighted_loss=w_loss,
        response_loss=e_resp,
        sensitivity_loss=e_sens,
        lambdas=lams,
        val_l2=val_l2,
        epoch_train_response=ep_resp,
        epoch_train_sensitivity=ep_sens,
        duration=time.perf_counter() - started,
    )
    return params, trace
