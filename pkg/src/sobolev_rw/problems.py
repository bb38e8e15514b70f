"""Analytic 2-D benchmark responses with closed-form gradients.

They stand in for simulation data: each maps a design point in [-1, 1]^2 to a
scalar response and its exact sensitivities.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import Dataset


@dataclass(frozen=True)
class AnalyticProblem:
    name: str
    n_in: int
    # vectorized: (n, n_in) -> (y (n,), grad (n, n_in))
    func: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    domain: tuple[tuple[float, float], ...] = ((-1.0, 1.0), (-1.0, 1.0))

    def eval(self, x):
        """Response and gradient at one point: (y (1,), dy/dx (1, n_in))."""
        x = np.asarray(x, dtype=np.float64).reshape(1, self.n_in)
        y, g = self.func(x)
        return y.reshape(1), g.reshape(1, self.n_in)

    def evaluate(self, xs):
        xs = np.asarray(xs, dtype=np.float64).reshape(-1, self.n_in)
        return self.func(xs)


def _trig(x):
    a, b = np.pi * x[:, 0], np.pi * x[:, 1]
    y = np.sin(a) * np.cos(b)
    g = np.stack([np.pi * np.cos(a) * np.cos(b), -np.pi * np.sin(a) * np.sin(b)], axis=1)
    return y, g


_PEAKS = (
    # amplitude, center, width
    (1.0, (-0.5, -0.4), 0.35),
    (-0.8, (0.45, 0.3), 0.25),
    (0.6, (0.0, 0.6), 0.45),
)


def _peaks(x):
    y = np.zeros(x.shape[0])
    g = np.zeros_like(x)
    for amp, c, w in _PEAKS:
        d = x - np.asarray(c)
        e = amp * np.exp(-np.sum(d * d, axis=1) / (2.0 * w * w))
        y += e
        g += -e[:, None] * d / (w * w)
    return y, g


def _ridge(x):
    t = np.tanh(3.0 * x[:, 1])
    y = x[:, 0] ** 2 + t
    g = np.stack([2.0 * x[:, 0], 3.0 * (1.0 - t * t)], axis=1)
    return y, g


_BUILTINS = {
    "trig": _trig,
    "peaks": _peaks,
    "ridge": _ridge,
}

BUILTIN_NAMES = tuple(_BUILTINS)


def builtin(name) -> AnalyticProblem:
    try:
        func = _BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {', '.join(BUILTIN_NAMES)}") from None
    return AnalyticProblem(name=name, n_in=2, func=func)


def grid_points(domain, points_per_axis):
    if points_per_axis < 2:
        raise ValueError("points_per_axis must be >= 2")
    axes = [np.linspace(lo, hi, points_per_axis) for lo, hi in domain]
    mesh = np.meshgrid(*axes, indexing="ij")
    # row-major: last input varies fastest
    return np.stack([m.ravel() for m in mesh], axis=1)


def sample_grid(p: AnalyticProblem, points_per_axis=25) -> Dataset:
    x = grid_points(p.domain, points_per_axis)
    y, g = p.evaluate(x)
    return Dataset(x, y[:, None], g[:, None, :])
