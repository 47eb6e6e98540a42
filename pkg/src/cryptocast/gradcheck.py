"""Finite-difference gradient verification.

Every trainable layer in this package is validated against this oracle:
the analytic gradients that drive training must agree with central
differences of the same loss.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalError


def grad_check(loss_and_grad, params, h: float = 1e-5) -> float:
    """Compare analytic gradients against central finite differences.

    Parameters
    ----------
    loss_and_grad : callable
        Maps a list of parameter arrays to (scalar loss, list of analytic
        gradient arrays of matching shapes). Must be deterministic.
    params : list of ndarray
        Point at which to check.
    h : float
        Central-difference step.

    Returns
    -------
    float
        max over all coordinates of |analytic - numeric| /
        max(|analytic|, |numeric|, 1e-8).
    """
    if h <= 0.0:
        raise ValueError("h must be positive")
    params = [np.array(p, dtype=np.float64) for p in params]
    loss0, grads = loss_and_grad(params)
    if not np.isfinite(loss0):
        raise NumericalError("loss is non-finite at the checkpoint")
    if len(grads) != len(params):
        raise NumericalError(
            f"got {len(grads)} gradients for {len(params)} parameters"
        )
    max_rel = 0.0
    for k, p in enumerate(params):
        grad = np.asarray(grads[k], dtype=np.float64)
        flat = p.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            loss_plus, _ = loss_and_grad(params)
            flat[i] = orig - h
            loss_minus, _ = loss_and_grad(params)
            flat[i] = orig
            if not (np.isfinite(loss_plus) and np.isfinite(loss_minus)):
                raise NumericalError("non-finite loss during finite differencing")
            numeric = (loss_plus - loss_minus) / (2.0 * h)
            analytic = gflat[i]
            denom = max(abs(analytic), abs(numeric), 1e-8)
            rel = abs(analytic - numeric) / denom
            if rel > max_rel:
                max_rel = rel
    return float(max_rel)
