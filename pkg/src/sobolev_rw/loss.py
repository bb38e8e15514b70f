"""Response and sensitivity losses, the residual-weighted total and the
validation metric."""

from dataclasses import dataclass

import numpy as np

from .mathcore import ShapeError


class DegenerateTargetError(ValueError):
    pass


@dataclass(frozen=True)
class LossBreakdown:
    response: float
    sensitivity: np.ndarray
    total_weighted: float
    lambda_used: np.ndarray

    @property
    def components(self):
        return np.concatenate([[self.response], self.sensitivity])


def response_loss(y_hat, y):
    """Half squared error; for batches (2-D) the mean over samples."""
    y_hat = np.asarray(y_hat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y_hat.shape != y.shape:
        raise ShapeError(f"shape mismatch {y_hat.shape} vs {y.shape}")
    r = y_hat - y
    if r.ndim == 1:
        return 0.5 * float(np.dot(r, r))
    return float(np.mean(0.5 * np.sum(r * r, axis=1)))


def sensitivity_loss_per_input(jac_hat, jac_true):
    """For each input j, half the squared norm of the column residual.

    Accepts one (n_out, n_in) Jacobian or a (batch, n_out, n_in) stack, in
    which case the per-input terms are averaged over samples.
    """
    jac_hat = np.asarray(jac_hat, dtype=np.float64)
    jac_true = np.asarray(jac_true, dtype=np.float64)
    if jac_hat.shape != jac_true.shape:
        raise ShapeError(f"shape mismatch {jac_hat.shape} vs {jac_true.shape}")
    r = jac_hat - jac_true
    if r.ndim == 2:
        return 0.5 * np.sum(r * r, axis=0)
    return np.mean(0.5 * np.sum(r * r, axis=1), axis=0)


def weighted_total(components, lam) -> LossBreakdown:
    """components = (E_response, E_sens_1, ..., E_sens_n)."""
    c = np.asarray(components, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    if c.shape != lam.shape:
        raise ShapeError(f"{c.size} loss components but {lam.size} weights")
    total = float(np.dot(lam, c))
    return LossBreakdown(
        response=float(c[0]),
        sensitivity=c[1:].copy(),
        total_weighted=total,
        lambda_used=lam.copy(),
    )


def relative_l2_error_arrays(y_pred, y_true):
    y_pred = np.asarray(y_pred, dtype=np.float64).ravel()
    y_true = np.asarray(y_true, dtype=np.float64).ravel()
    denom = np.linalg.norm(y_true)
    if denom == 0.0:
        raise DegenerateTargetError("validation responses are all zero")
    return float(np.linalg.norm(y_pred - y_true) / denom)


def relative_l2_error(params, val, stats):
    """||y_hat - y|| / ||y|| over all validation responses, in original units.

    ``val`` is the standardized validation set; ``stats`` maps predictions and
    targets back to physical units.
    """
    from .network import forward

    y_hat_s, _ = forward(params, val.x)
    y_hat = y_hat_s * stats.y_std + stats.y_mean
    y = val.y * stats.y_std + stats.y_mean
    return relative_l2_error_arrays(y_hat, y)
