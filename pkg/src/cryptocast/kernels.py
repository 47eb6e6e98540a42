"""Feedforward kernel baselines: Gaussian RBF network and a memorizing
kernel regressor (weighted-average smoother).

Both models consume flat feature vectors. Fitting is deterministic given
the seed; predictions are pure functions of the fitted model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, NumericalError, SizeError
from .rng import Rng

RIDGE_JITTER = 1e-8


def _pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between rows of a (p,k) and b (q,k)."""
    aa = (a * a).sum(axis=1)[:, None]
    bb = (b * b).sum(axis=1)[None, :]
    sq = aa + bb - 2.0 * (a @ b.T)
    return np.maximum(sq, 0.0)


# ---------------------------------------------------------------------------
# k-means (used only to place RBF centers)
# ---------------------------------------------------------------------------

def kmeans(X: np.ndarray, n_clusters: int, rng: Rng,
           max_iter: int = 100, restarts: int = 3):
    """Seeded Lloyd iterations with random-row initialization.

    Runs `restarts` independent inits and keeps the assignment with the
    lowest inertia. Empty clusters are re-seeded at the point farthest
    from its assigned center, which keeps the procedure deterministic.
    """
    n = X.shape[0]
    if n_clusters > n:
        raise SizeError(f"cannot place {n_clusters} centers on {n} samples")
    best_centers = None
    best_inertia = np.inf
    for _ in range(restarts):
        pick = rng.sample_without_replacement(n, n_clusters)
        centers = X[pick].copy()
        for _ in range(max_iter):
            sq = _pairwise_sq_dists(X, centers)
            assign = sq.argmin(axis=1)
            nearest = sq[np.arange(n), assign]
            new_centers = centers.copy()
            for c in range(n_clusters):
                members = assign == c
                if members.any():
                    new_centers[c] = X[members].mean(axis=0)
                else:
                    new_centers[c] = X[int(nearest.argmax())]
            if np.allclose(new_centers, centers, rtol=0.0, atol=1e-12):
                centers = new_centers
                break
            centers = new_centers
        sq = _pairwise_sq_dists(X, centers)
        inertia = float(sq.min(axis=1).sum())
        if inertia < best_inertia:
            best_inertia = inertia
            best_centers = centers
    return best_centers, best_inertia


# ---------------------------------------------------------------------------
# RBF network
# ---------------------------------------------------------------------------

@dataclass
class RbfnModel:
    """Gaussian-kernel network: hidden responses phi_i(x) =
    exp(-||x - c_i||^2 / (2 s_i^2)), output = sum w_i phi_i + w0."""

    centers: np.ndarray   # (m, k)
    spreads: np.ndarray   # (m,) all positive
    weights: np.ndarray   # (m,)
    bias: float

    def __post_init__(self):
        if np.any(self.spreads <= 0.0):
            raise NumericalError("rbfn spreads must be positive")


def _design_matrix(X: np.ndarray, centers: np.ndarray, spreads: np.ndarray) -> np.ndarray:
    sq = _pairwise_sq_dists(X, centers)
    return np.exp(-sq / (2.0 * spreads[None, :] ** 2))


def _solve_readout(phi: np.ndarray, y: np.ndarray):
    """Least squares on [phi | 1] via normal equations with ridge jitter."""
    a = np.column_stack([phi, np.ones(phi.shape[0])])
    gram = a.T @ a + RIDGE_JITTER * np.eye(a.shape[1])
    try:
        coef = np.linalg.solve(gram, a.T @ y)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"rbfn readout system is singular: {exc}") from exc
    if not np.all(np.isfinite(coef)):
        raise NumericalError("rbfn readout produced non-finite coefficients")
    return coef[:-1], float(coef[-1])


def rbfn_fit(X: np.ndarray, y: np.ndarray, m: int, seed: int,
             spread: float | None = None) -> RbfnModel:
    """Place m centers by seeded k-means, set a shared spread from the
    maximum inter-center distance (d_max / sqrt(2m)), then solve the
    linear readout by least squares.

    `spread` overrides the heuristic, which the interpolation tests use.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if m < 1:
        raise SizeError(f"need at least one center, got m={m}")
    if m > n:
        raise SizeError(f"m={m} centers exceed n={n} training samples")
    centers, _ = kmeans(X, m, Rng(seed))
    if spread is None:
        if m > 1:
            d_max = float(np.sqrt(_pairwise_sq_dists(centers, centers).max()))
        else:
            d_max = 0.0
        sigma = d_max / np.sqrt(2.0 * m)
        if sigma <= 0.0:
            # single center or coincident centers: fall back to the RMS
            # sample-to-center distance, then to unity
            rms = float(np.sqrt(_pairwise_sq_dists(X, centers).mean()))
            sigma = rms if rms > 0.0 else 1.0
    else:
        if spread <= 0.0:
            raise NumericalError(f"spread must be positive, got {spread}")
        sigma = float(spread)
    spreads = np.full(m, sigma)
    phi = _design_matrix(X, centers, spreads)
    weights, bias = _solve_readout(phi, y)
    return RbfnModel(centers=centers, spreads=spreads, weights=weights, bias=bias)


def rbfn_predict(model: RbfnModel, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.centers.shape[1],):
        raise DimensionError(
            f"query shape {x.shape} does not match center dimension "
            f"{model.centers.shape[1]}"
        )
    phi = _design_matrix(x[None, :], model.centers, model.spreads)[0]
    return float(phi @ model.weights + model.bias)


def rbfn_predict_batch(model: RbfnModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.centers.shape[1]:
        raise DimensionError(
            f"query matrix shape {X.shape} does not match center dimension "
            f"{model.centers.shape[1]}"
        )
    phi = _design_matrix(X, model.centers, model.spreads)
    return phi @ model.weights + model.bias


def rbfn_loss_and_grad(model: RbfnModel, X: np.ndarray, y: np.ndarray):
    """Mean squared residual of the linear readout and its gradient with
    respect to (weights, bias). Centers and spreads are held fixed, exactly
    as in fitting, so this is the objective the least-squares solve minimizes
    (up to the ridge jitter)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    phi = _design_matrix(X, model.centers, model.spreads)
    resid = phi @ model.weights + model.bias - y
    n = y.shape[0]
    loss = float((resid**2).mean())
    grad_w = 2.0 * phi.T @ resid / n
    grad_b = float(2.0 * resid.mean())
    return loss, [grad_w, np.array([grad_b])]


# ---------------------------------------------------------------------------
# Memorizing kernel regressor
# ---------------------------------------------------------------------------

@dataclass
class GrnnModel:
    """Stores the training set verbatim; predicts the kernel-weighted
    average of stored targets with a single shared bandwidth."""

    stored_inputs: np.ndarray   # (n, k)
    stored_targets: np.ndarray  # (n,)
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise NumericalError("grnn sigma must be positive")


def _grnn_weights(x_query: np.ndarray, stored: np.ndarray, sigma: float) -> np.ndarray:
    sq = _pairwise_sq_dists(x_query, stored)
    expo = -sq / (2.0 * sigma**2)
    expo -= expo.max(axis=1, keepdims=True)  # distant queries stay finite
    w = np.exp(expo)
    return w / w.sum(axis=1, keepdims=True)


def grnn_fit(X: np.ndarray, y: np.ndarray, sigma_grid=None) -> GrnnModel:
    """Memorize (X, y) and pick sigma by chronological holdout: predict the
    last 20% of rows from the first 80% and keep the grid value with the
    smallest holdout MSE (earliest wins ties)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if n < 3:
        raise SizeError(f"grnn_fit needs at least 3 samples, got {n}")
    if sigma_grid is None:
        sigma_grid = DEFAULT_SIGMA_GRID
    grid = [float(s) for s in sigma_grid]
    if not grid:
        raise ConfigError("sigma grid must not be empty")
    if any(s <= 0.0 for s in grid):
        raise ConfigError(f"sigma grid values must be positive: {grid}")
    n_fit = max(1, int(np.floor(0.8 * n)))
    if n_fit >= n:
        n_fit = n - 1
    x_fit, y_fit = X[:n_fit], y[:n_fit]
    x_hold, y_hold = X[n_fit:], y[n_fit:]
    best_sigma = grid[0]
    best_mse = np.inf
    for sigma in grid:
        w = _grnn_weights(x_hold, x_fit, sigma)
        mse = float(((w @ y_fit - y_hold) ** 2).mean())
        if mse < best_mse:
            best_mse = mse
            best_sigma = sigma
    return GrnnModel(stored_inputs=X.copy(), stored_targets=y.copy(), sigma=best_sigma)


DEFAULT_SIGMA_GRID = (0.01, 0.03, 0.1, 0.3, 1.0)


def grnn_predict(model: GrnnModel, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.stored_inputs.shape[1],):
        raise DimensionError(
            f"query shape {x.shape} does not match stored dimension "
            f"{model.stored_inputs.shape[1]}"
        )
    w = _grnn_weights(x[None, :], model.stored_inputs, model.sigma)[0]
    return float(w @ model.stored_targets)


def grnn_predict_batch(model: GrnnModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.stored_inputs.shape[1]:
        raise DimensionError(
            f"query matrix shape {X.shape} does not match stored dimension "
            f"{model.stored_inputs.shape[1]}"
        )
    w = _grnn_weights(X, model.stored_inputs, model.sigma)
    return w @ model.stored_targets
