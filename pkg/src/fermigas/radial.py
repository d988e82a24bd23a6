"""Radial Fourier transforms and small fitting helpers shared across modules."""

from __future__ import annotations

import numpy as np

from .errors import AccuracyError


def simpson_weights(r: np.ndarray) -> np.ndarray:
    """Composite Simpson weights on a uniform mesh (trapezoid patch if even)."""
    n = len(r)
    h = r[1] - r[0]
    weights = np.ones(n)
    if n % 2 == 1:
        weights[1:-1:2] = 4.0
        weights[2:-1:2] = 2.0
        weights *= h / 3.0
    else:
        weights[1:-2:2] = 4.0
        weights[2:-2:2] = 2.0
        weights *= h / 3.0
        weights[-2] += 0.5 * h - h / 3.0
        weights[-1] = 0.5 * h
    return weights


def radial_fourier_on_mesh(r: np.ndarray, w: np.ndarray, p_norms: np.ndarray,
                           chunk: int = 16) -> np.ndarray:
    """ghat(p) = (4 pi / p) int r sin(p r) w(r) dr on a uniform mesh.

    The p -> 0 limit 4 pi int r^2 w dr is taken analytically.  Chunked over
    p to bound memory; raises when the mesh cannot resolve the oscillation.
    """
    r = np.asarray(r, dtype=float)
    w = np.asarray(w, dtype=float)
    h = r[1] - r[0]
    p_in = np.atleast_1d(np.asarray(p_norms, dtype=float))
    if len(p_in) and p_in.max() * h > 0.5:
        raise AccuracyError("mesh too coarse for the requested momenta")
    rw = r * w * simpson_weights(r)
    out = np.empty_like(p_in)
    small = p_in * max(r[-1], 1.0) < 1e-6
    if np.any(small):
        out[small] = 4.0 * np.pi * np.sum(r * rw)
    idx = np.nonzero(~small)[0]
    for start in range(0, len(idx), chunk):
        sel = idx[start:start + chunk]
        ps = p_in[sel][:, None]
        out[sel] = (4.0 * np.pi / p_in[sel]) * np.sum(np.sin(ps * r[None, :]) * rw[None, :], axis=1)
    if np.asarray(p_norms).ndim == 0:
        return out[0]
    return out


def inverse_radial_fourier(ghat, r_points: np.ndarray, t_mesh: np.ndarray) -> np.ndarray:
    """g(r) = (1/2 pi^2 r) int t sin(t r) ghat(t) dt for a radial multiplier.

    ghat may be a callable or an array on t_mesh.  The r -> 0 limit is
    (1/2 pi^2) int t^2 ghat dt.
    """
    t = np.asarray(t_mesh, dtype=float)
    gh = ghat(t) if callable(ghat) else np.asarray(ghat, dtype=float)
    tw = t * gh * simpson_weights(t)
    r = np.asarray(r_points, dtype=float)
    out = np.empty_like(r)
    small = r * max(t[-1], 1.0) < 1e-9
    if np.any(small):
        out[small] = np.sum(t * tw) / (2.0 * np.pi**2)
    idx = np.nonzero(~small)[0]
    for start in range(0, len(idx), 16):
        sel = idx[start:start + 16]
        rs = r[sel][:, None]
        out[sel] = np.sum(np.sin(rs * t[None, :]) * tw[None, :], axis=1) / (2.0 * np.pi**2 * r[sel])
    return out


def fit_loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    good = (x > 0) & (y > 0)
    if np.count_nonzero(good) < 2:
        raise ValueError("need at least two positive samples")
    slope, _ = np.polyfit(np.log(x[good]), np.log(y[good]), 1)
    return float(slope)
