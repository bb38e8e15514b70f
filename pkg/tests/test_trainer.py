import numpy as np
import pytest

from sobolev_rw import data, problems
from sobolev_rw.data import MinibatchPlan, minibatches
from sobolev_rw.loss import response_loss
from sobolev_rw.network import forward, init_params, response_gradient
from sobolev_rw.optim import AdamConfig, AdamState, adam_step
from sobolev_rw.trainer import DivergenceError, TrainConfig, count_iterations, train
from sobolev_rw.weighting import ADAPTIVE_MODES, ALL_MODES


def response_only_reference(cfg, train_set):
    """Plain half-MSE training loop that never looks at sensitivities."""
    params = init_params(cfg.shape, cfg.seed)
    state = AdamState.zeros(cfg.shape.n_params)
    plan = MinibatchPlan(cfg.batch_size, cfg.seed)
    trace = []
    for epoch in range(cfg.epochs):
        for idx in minibatches(len(train_set), plan, epoch):
            y_hat, cache = forward(params, train_set.x[idx])
            trace.append(response_loss(y_hat, train_set.y[idx]))
            state, step = adam_step(state, response_gradient(params, cache, y_hat - train_set.y[idx]),
                                    cfg.adam_theta)
            params.apply_update(step)
    return params, np.array(trace)


def test_count_iterations():
    assert count_iterations(TrainConfig(epochs=500, batch_size=64), 320) == 2500
    assert count_iterations(TrainConfig(epochs=7, batch_size=64), 50) == 7
    assert count_iterations(TrainConfig(epochs=1, batch_size=64), 625) == 10


def test_trace_shapes(small_split):
    tr, va, _ = small_split
    cfg = TrainConfig(mode=6, epochs=3, batch_size=16)
    _, trace = train(cfg, tr, va)
    n = count_iterations(cfg, len(tr))
    assert len(trace) == n
    assert trace.lambdas.shape == (n, 3) and trace.sensitivity_loss.shape == (n, 2)
    assert not np.any(np.isnan(trace.val_l2))
    assert trace.epoch_train_response.shape == (3,)
    assert trace.duration > 0


def test_val_stride(small_split):
    tr, va, _ = small_split
    _, trace = train(TrainConfig(epochs=4, batch_size=16, val_stride=5), tr, va)
    logged = np.flatnonzero(~np.isnan(trace.val_l2))
    assert logged[0] == 0 and logged[-1] == len(trace) - 1
    assert np.all(np.diff(logged[:-1]) == 5)


@pytest.mark.parametrize("mode", [6, 10, 13])
def test_deterministic(small_split, mode):
    tr, va, _ = small_split
    cfg = TrainConfig(mode=mode, epochs=4, batch_size=16, seed=3)
    p1, t1 = train(cfg, tr, va)
    p2, t2 = train(cfg, tr, va)
    assert np.array_equal(p1.flat(), p2.flat())
    for name in ("weighted_loss", "response_loss", "sensitivity_loss", "lambdas", "val_l2"):
        assert getattr(t1, name).tobytes() == getattr(t2, name).tobytes()


def test_mode11_is_plain_training(small_split, rng):
    tr, va, _ = small_split
    cfg = TrainConfig(mode=11, epochs=6, batch_size=16, seed=1)
    params, trace = train(cfg, tr, va)
    ref_params, ref_trace = response_only_reference(cfg, tr)
    assert trace.response_loss.tobytes() == ref_trace.tobytes()
    assert params.flat().tobytes() == ref_params.flat().tobytes()

    corrupted = tr.with_sensitivities(rng.normal(0, 100, tr.dy.shape))
    p2, t2 = train(cfg, corrupted, va)
    assert t2.response_loss.tobytes() == trace.response_loss.tobytes()
    assert p2.flat().tobytes() == params.flat().tobytes()


@pytest.mark.parametrize("mode", ADAPTIVE_MODES)
def test_lambda_bounds_every_row(small_split, mode):
    tr, va, _ = small_split
    _, trace = train(TrainConfig(mode=mode, epochs=5, batch_size=16), tr, va)
    assert np.all(trace.lambdas > 0.01) and np.all(trace.lambdas < 2.01)


def test_divergence_reports_iteration(small_split):
    tr, va, _ = small_split
    cfg = TrainConfig(mode=10, epochs=50, batch_size=16, adam_theta=AdamConfig(learn_rate=1e300))
    with pytest.raises(DivergenceError) as info:
        train(cfg, tr, va)
    assert info.value.iteration >= 1


def test_rejects_raw_data():
    raw = problems.sample_grid(problems.builtin("trig"), 5)
    with pytest.raises(ValueError, match="standardized"):
        train(TrainConfig(epochs=1), raw, raw)


# modes 2 and 13 push their weights up faster than the losses fall, so the
# weighted total can rise; for them the unweighted total must still fall
GROWING_WEIGHT_MODES = (2, 13)


@pytest.mark.parametrize("name", problems.BUILTIN_NAMES)
@pytest.mark.parametrize("mode", ALL_MODES)
def test_loss_trends_down(name, mode):
    raw = problems.sample_grid(problems.builtin(name), 13)
    a, b = data.grid_split(raw, 85, 84)
    tr, stats = data.fit_standardize(a)
    va = data.apply_standardize(b, stats)
    _, trace = train(TrainConfig(mode=mode, epochs=100, batch_size=32, val_stride=50), tr, va)
    k = max(1, len(trace) // 10)
    if mode in GROWING_WEIGHT_MODES:
        curve = trace.response_loss + trace.sensitivity_loss.sum(axis=1)
        assert trace.lambdas[-1, 1:].min() > trace.lambdas[0, 1:].max()
    else:
        curve = trace.weighted_loss
    assert curve[-k:].mean() < curve[:k].mean()


# 20 seeds of this run ended between 0.43 and 0.95; 1.0 is also the error of
# predicting zero everywhere
TRIG_MODE10_THRESHOLD = 1.0


@pytest.mark.slow
def test_trig_mode10_reference_run():
    from sobolev_rw import experiment as ex

    d = ex.prepare_data(ex.DataConfig(problem="trig"))
    _, trace = train(TrainConfig(mode=10, epochs=500, seed=0, val_stride=10**9), d.train, d.val)
    assert trace.final_l2 < TRIG_MODE10_THRESHOLD
    assert trace.final_l2 < trace.val_l2[0]
