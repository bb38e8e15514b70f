"""Central-difference verification of input Jacobians and Sobolev gradients."""

from dataclasses import dataclass

import numpy as np

from .loss import response_loss, sensitivity_loss_per_input
from .network import NetworkParams, NetworkShape, backprop, forward, init_params, input_jacobian

KINK_GUARD = 1e-4


@dataclass
class GradcheckReport:
    n_nets: int
    max_param_rel_err: float
    max_jacobian_rel_err: float
    skipped_samples: int

    def passed(self, tol=1e-6):
        return self.max_param_rel_err <= tol and self.max_jacobian_rel_err <= tol


def rel_err(a, b):
    """||a - b|| / ||b|| (falls back to the absolute error when b vanishes)."""
    denom = np.linalg.norm(b)
    diff = np.linalg.norm(np.asarray(a) - np.asarray(b))
    return float(diff / denom) if denom > 0 else float(diff)


def sobolev_loss(shape, flat, x, y, dy, lam):
    p = NetworkParams.from_flat(shape, flat)
    y_hat, cache = forward(p, x)
    jac = input_jacobian(p, cache)
    return float(lam[0] * response_loss(y_hat, y) + np.dot(lam[1:], sensitivity_loss_per_input(jac, dy)))


def fd_param_gradient(shape, flat, x, y, dy, lam, h=1e-6):
    g = np.empty_like(flat)
    for k in range(flat.size):
        up = flat.copy()
        dn = flat.copy()
        up[k] += h
        dn[k] -= h
        g[k] = (sobolev_loss(shape, up, x, y, dy, lam) - sobolev_loss(shape, dn, x, y, dy, lam)) / (2 * h)
    return g


def fd_input_jacobian(params, x, h=1e-6):
    n_in = x.size
    cols = []
    for j in range(n_in):
        e = np.zeros(n_in)
        e[j] = h
        cols.append((forward(params, x + e)[0] - forward(params, x - e)[0]) / (2 * h))
    return np.stack(cols, axis=1)


def random_case(shape: NetworkShape, rng, batch=4, max_tries=200):
    """Random net and standardized-looking samples with every |z| > KINK_GUARD."""
    skipped = 0
    params = init_params(shape, int(rng.integers(2**31)))
    for b in params.biases:
        b += rng.normal(0.0, 0.3, b.shape)
    xs = []
    while len(xs) < batch:
        if skipped > max_tries:
            raise RuntimeError("could not find kink-free samples")
        x = rng.normal(size=shape.n_in)
        _, cache = forward(params, x)
        if cache.min_abs_preactivation()[0] > KINK_GUARD:
            xs.append(x)
        else:
            skipped += 1
    x = np.array(xs)
    y = rng.normal(size=(batch, shape.n_out))
    dy = rng.normal(size=(batch, shape.n_out, shape.n_in))
    return params, x, y, dy, skipped


def run_gradcheck(shape=NetworkShape((2, 5, 3, 3, 1)), n_nets=20, seed=0, batch=4):
    rng = np.random.default_rng(seed)
    worst_p = worst_j = 0.0
    skipped = 0
    for _ in range(n_nets):
        params, x, y, dy, s = random_case(shape, rng, batch)
        skipped += s
        lam = rng.uniform(0.05, 2.0, 1 + shape.n_in)
        y_hat, cache = forward(params, x)
        jac = input_jacobian(params, cache)
        g = backprop(params, cache, y_hat - y, jac - dy, lam).flat
        g_fd = fd_param_gradient(shape, params.flat(), x, y, dy, lam)
        worst_p = max(worst_p, rel_err(g, g_fd))
        for i in range(batch):
            worst_j = max(worst_j, rel_err(jac[i], fd_input_jacobian(params, x[i])))
    return GradcheckReport(n_nets, worst_p, worst_j, skipped)
