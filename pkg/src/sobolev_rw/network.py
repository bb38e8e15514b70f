"""Feedforward ReLU network with exact input Jacobians and Sobolev backprop.

Everything here works on a minibatch: inputs have shape (batch, n_in). Passing
a single 1-D input is also accepted and the results come back without the batch
axis. Gradients are averaged over the batch, matching the mean-over-samples
loss convention.

With ReLU hidden units the network is piecewise linear, so for a fixed
activation pattern the input Jacobian is

    J = W[L] D[L-1] W[L-1] ... D[1] W[1]

with D[l] the 0/1 mask of layer l. Each W[l] enters J exactly once, which
makes the sensitivity gradient a sum of outer products between the
output-side product (left of W[l]) and the input-side product (right of W[l]).
Biases only move the masks, so their sensitivity gradient is zero.
"""

from dataclasses import dataclass, field

import numpy as np

from .mathcore import ShapeError


@dataclass(frozen=True)
class NetworkShape:
    layer_sizes: tuple
    hidden_activation: str = "relu"
    output_activation: str = "identity"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2:
            raise ValueError("need at least an input and an output layer")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must be >= 1, got {sizes}")
        if self.hidden_activation != "relu" or self.output_activation != "identity":
            raise ValueError("only relu hidden layers with an identity output are supported")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def n_layers(self):
        return len(self.layer_sizes) - 1

    @property
    def n_in(self):
        return self.layer_sizes[0]

    @property
    def n_out(self):
        return self.layer_sizes[-1]

    @property
    def n_params(self):
        s = self.layer_sizes
        return sum(s[l] * s[l - 1] + s[l] for l in range(1, len(s)))

    @classmethod
    def parse(cls, text):
        return cls(tuple(int(p) for p in str(text).split(",") if p.strip()))


@dataclass
class NetworkParams:
    weights: list
    biases: list

    @property
    def shape(self):
        sizes = [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]
        return NetworkShape(tuple(sizes))

    def flat(self):
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)

    @classmethod
    def from_flat(cls, shape: NetworkShape, vec):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != shape.n_params:
            raise ShapeError(f"expected {shape.n_params} parameters, got {vec.size}")
        weights, biases = [], []
        k = 0
        s = shape.layer_sizes
        for l in range(1, len(s)):
            nw = s[l] * s[l - 1]
            weights.append(vec[k:k + nw].reshape(s[l], s[l - 1]).copy())
            k += nw
            biases.append(vec[k:k + s[l]].copy())
            k += s[l]
        return cls(weights, biases)

    def copy(self):
        return NetworkParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def apply_update(self, update):
        """Add a flat update vector in place."""
        k = 0
        for w, b in zip(self.weights, self.biases):
            w += update[k:k + w.size].reshape(w.shape)
            k += w.size
            b += update[k:k + b.size]
            k += b.size


@dataclass
class ForwardCache:
    z: list  # pre-activations of layers 1..L, each (batch, n[l])
    o: list  # outputs of layers 0..L, o[0] = x
    single: bool = False

    @property
    def masks(self):
        # relu'(z) with relu'(0) = 0
        return [(z > 0.0).astype(np.float64) for z in self.z[:-1]]

    def min_abs_preactivation(self):
        """Smallest |z| over hidden units, per sample."""
        if len(self.z) < 2:
            return np.full(self.o[0].shape[0], np.inf)
        return np.min(np.concatenate([np.abs(z) for z in self.z[:-1]], axis=1), axis=1)


@dataclass
class BackpropState:
    delta: list
    grad_w: list
    grad_b: list
    flat: np.ndarray = field(repr=False)


def init_params(shape: NetworkShape, seed) -> NetworkParams:
    """He-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    s = shape.layer_sizes
    weights, biases = [], []
    for l in range(1, len(s)):
        bound = np.sqrt(6.0 / s[l - 1])
        weights.append(rng.uniform(-bound, bound, size=(s[l], s[l - 1])))
        biases.append(np.zeros(s[l]))
    return NetworkParams(weights, biases)


def forward(params: NetworkParams, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    n_in = params.weights[0].shape[1]
    if xb.ndim != 2 or xb.shape[1] != n_in:
        raise ShapeError(f"input has shape {x.shape}, network expects {n_in} inputs")
    o = [xb]
    z = []
    last = len(params.weights) - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        zl = o[-1] @ w.T + b
        z.append(zl)
        o.append(zl if l == last else np.maximum(zl, 0.0))
    cache = ForwardCache(z, o, single)
    y_hat = o[-1][0] if single else o[-1]
    return y_hat, cache


def _output_side(params, masks, batch):
    """A[l] = dy_hat/do[l] for l = 1..L, each (batch, n_out, n[l]); index 0 unused."""
    L = len(params.weights)
    n_out = params.weights[-1].shape[0]
    A = [None] * (L + 1)
    A[L] = np.broadcast_to(np.eye(n_out), (batch, n_out, n_out))
    for l in range(L, 1, -1):
        A[l - 1] = (A[l] @ params.weights[l - 1]) * masks[l - 2][:, None, :]
    return A


def _input_side(params, masks, batch):
    """B[l] = do[l-1]/dx for l = 1..L, each (batch, n[l-1], n_in); index 0 unused."""
    L = len(params.weights)
    n_in = params.weights[0].shape[1]
    B = [None] * (L + 1)
    B[1] = np.broadcast_to(np.eye(n_in), (batch, n_in, n_in))
    for l in range(1, L):
        B[l + 1] = (params.weights[l - 1] @ B[l]) * masks[l - 1][:, :, None]
    return B


def input_jacobian(params: NetworkParams, cache: ForwardCache):
    """dy_hat/dx for every cached sample, (batch, n_out, n_in)."""
    batch = cache.o[0].shape[0]
    A = _output_side(params, cache.masks, batch)
    J = A[1] @ params.weights[0]
    return J[0] if cache.single else J


def _as_batch(a, single, ndim):
    a = np.asarray(a, dtype=np.float64)
    return a[None] if single and a.ndim == ndim - 1 else a


def _response_grads(params, cache, A, resid_y):
    batch = resid_y.shape[0]
    gw, gb, delta = [], [], []
    for l in range(1, len(params.weights) + 1):
        d = np.einsum("bok,bo->bk", A[l], resid_y)
        delta.append(d)
        gw.append(d.T @ cache.o[l - 1] / batch)
        gb.append(d.sum(axis=0) / batch)
    return gw, gb, delta


def _sensitivity_grads(params, A, B, resid_jac):
    """Per-input weight gradients; returns list over layers of (n_in, n[l], n[l-1])."""
    batch = resid_jac.shape[0]
    out = []
    for l in range(1, len(params.weights) + 1):
        u = np.einsum("bok,boj->bkj", A[l], resid_jac)
        out.append(np.einsum("bkj,bpj->jkp", u, B[l]) / batch)
    return out


def _flatten(gw, gb):
    parts = []
    for w, b in zip(gw, gb):
        parts.append(w.ravel())
        parts.append(b.ravel())
    return np.concatenate(parts)


def _check_residuals(params, cache, resid_y, resid_jac):
    batch = cache.o[0].shape[0]
    n_out = params.weights[-1].shape[0]
    n_in = params.weights[0].shape[1]
    if resid_y.shape != (batch, n_out):
        raise ShapeError(f"response residual has shape {resid_y.shape}, expected {(batch, n_out)}")
    if resid_jac is not None and resid_jac.shape != (batch, n_out, n_in):
        raise ShapeError(
            f"sensitivity residual has shape {resid_jac.shape}, expected {(batch, n_out, n_in)}"
        )


def response_gradient(params: NetworkParams, cache: ForwardCache, resid_y):
    """Flat gradient of the mean half-squared response error alone."""
    resid_y = _as_batch(resid_y, cache.single, 2)
    _check_residuals(params, cache, resid_y, None)
    A = _output_side(params, cache.masks, resid_y.shape[0])
    gw, gb, _ = _response_grads(params, cache, A, resid_y)
    return _flatten(gw, gb)


def per_loss_gradients(params: NetworkParams, cache: ForwardCache, resid_y, resid_jac):
    """Unweighted flat gradients [g_response, g_sens_1, ..., g_sens_n_in] as rows."""
    resid_y = _as_batch(resid_y, cache.single, 2)
    resid_jac = _as_batch(resid_jac, cache.single, 3)
    _check_residuals(params, cache, resid_y, resid_jac)
    batch = resid_y.shape[0]
    masks = cache.masks
    A = _output_side(params, masks, batch)
    B = _input_side(params, masks, batch)
    gw, gb, _ = _response_grads(params, cache, A, resid_y)
    sens = _sensitivity_grads(params, A, B, resid_jac)
    n_in = params.weights[0].shape[1]
    rows = [_flatten(gw, gb)]
    zero_b = [np.zeros_like(b) for b in params.biases]
    for j in range(n_in):
        rows.append(_flatten([s[j] for s in sens], zero_b))
    return np.stack(rows)


def combine(grads, lam):
    """sum_k lam[k] * grads[k], skipping zero weights so they cannot leak NaN/noise."""
    total = None
    for g, w in zip(grads, lam):
        if w == 0.0:
            continue
        term = w * g
        total = term if total is None else total + term
    if total is None:
        total = np.zeros(np.shape(grads)[1])
    return total


def backprop(params: NetworkParams, cache: ForwardCache, resid_y, resid_jac, lam) -> BackpropState:
    """Gradient of lam[0]*E_resp + sum_j lam[1+j]*E_sens_j w.r.t. all parameters."""
    resid_y = _as_batch(resid_y, cache.single, 2)
    resid_jac = _as_batch(resid_jac, cache.single, 3)
    _check_residuals(params, cache, resid_y, resid_jac)
    lam = np.asarray(lam, dtype=np.float64)
    n_in = params.weights[0].shape[1]
    if lam.shape != (1 + n_in,):
        raise ShapeError(f"expected {1 + n_in} residual weights, got {lam.shape}")
    batch = resid_y.shape[0]
    masks = cache.masks
    A = _output_side(params, masks, batch)
    gw_r, gb_r, delta = _response_grads(params, cache, A, resid_y)

    grad_w = [None] * len(gw_r)
    grad_b = [None] * len(gb_r)
    if lam[0] != 0.0:
        grad_w = [lam[0] * g for g in gw_r]
        grad_b = [lam[0] * g for g in gb_r]
    if np.any(lam[1:] != 0.0):
        B = _input_side(params, masks, batch)
        sens = _sensitivity_grads(params, A, B, resid_jac)
        for l, s in enumerate(sens):
            for j in range(n_in):
                if lam[1 + j] == 0.0:
                    continue
                term = lam[1 + j] * s[j]
                grad_w[l] = term if grad_w[l] is None else grad_w[l] + term
    grad_w = [np.zeros_like(w) if g is None else g for g, w in zip(grad_w, params.weights)]
    grad_b = [np.zeros_like(b) if g is None else g for g, b in zip(grad_b, params.biases)]
    return BackpropState(delta=delta, grad_w=grad_w, grad_b=grad_b, flat=_flatten(grad_w, grad_b))
