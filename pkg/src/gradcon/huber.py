"""Huber smoothing of the Euclidean norm and its first two derivatives.

``phi(v, tau)`` is quadratic for |v| <= tau and linear outside, matching the
norm up to tau/2.  All three kernels broadcast over leading axes, so ``v``
may be a single 2-vector or an array of shape (..., 2).  The switch case
|v| = tau is assigned to the quadratic branch; both branches agree there.
"""

from __future__ import annotations

import numpy as np


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not tau > 0.0:
        raise ValueError(f"smoothing radius must be positive, got {tau}")
    return tau


def phi(v, tau: float):
    """Smoothed norm: |v|^2/(2 tau) inside, |v| - tau/2 outside."""
    tau = _check_tau(tau)
    v = np.asarray(v, dtype=float)
    r = np.linalg.norm(v, axis=-1)
    return np.where(r <= tau, r * r / (2.0 * tau), r - 0.5 * tau)


def dphi(v, tau: float):
    """Gradient of ``phi``: v/tau inside, v/|v| outside; |dphi| <= 1."""
    tau = _check_tau(tau)
    v = np.asarray(v, dtype=float)
    r = np.linalg.norm(v, axis=-1)
    quad = r <= tau
    safe_r = np.where(quad, 1.0, r)  # outside branch has r > tau > 0
    scale = np.where(quad, 1.0 / tau, 1.0 / safe_r)
    return v * scale[..., None]


def d2phi(v, tau: float):
    """Hessian of ``phi``: I/tau inside, (I - v v^T/|v|^2)/|v| outside."""
    tau = _check_tau(tau)
    v = np.asarray(v, dtype=float)
    r = np.linalg.norm(v, axis=-1)
    quad = r <= tau
    safe_r = np.where(quad, 1.0, r)
    iso = np.where(quad, 1.0 / tau, 1.0 / safe_r)
    rank1 = np.where(quad, 0.0, 1.0 / safe_r**3)
    outer = v[..., :, None] * v[..., None, :]
    eye = np.eye(2)
    return iso[..., None, None] * eye - rank1[..., None, None] * outer
