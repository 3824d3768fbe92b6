"""Composite-Simpson integration along straight ray segments.

All routines are batched over rays: ``anchors`` is (N, dim), ``march`` the
(unit) stepping direction per ray, and ``lengths`` the segment length per
ray.  A common panel count is used for the whole batch, so short rays are
integrated with a finer local step than requested, never coarser.  Sample
points for all panels are evaluated in one call per field, chunked when the
panel-by-ray block would get too large.
"""

from __future__ import annotations

import math
from typing import Callable, Optional, Tuple

import numpy as np

# Largest panel-by-ray block evaluated at once (entries, not bytes).
_CHUNK_ENTRIES = 4_000_000


def even_panels(length: float, step: float, minimum: int = 2) -> int:
    """Smallest even panel count covering ``length`` at resolution ``step``."""
    if step <= 0.0:
        raise ValueError("step must be positive")
    n = max(minimum, int(math.ceil(length / step)))
    return n + (n % 2)


def simpson_coefficients(n_panels: int) -> np.ndarray:
    """Pattern 1,4,2,...,4,1 for composite Simpson with n_panels panels."""
    c = np.full(n_panels + 1, 2.0)
    c[1::2] = 4.0
    c[0] = c[-1] = 1.0
    return c


def _k_chunks(n_panels: int, n_rays: int):
    """Even-aligned k-ranges keeping chunk blocks below the entry budget."""
    rows = max(2, _CHUNK_ENTRIES // max(n_rays, 1))
    rows -= rows % 2
    edges = list(range(0, n_panels, rows)) + [n_panels]
    return [(a, b) for a, b in zip(edges[:-1], edges[1:])]


def _sample_block(anchors, march, h, k_lo, k_hi):
    """Points anchor + (h*k)*march for k in [k_lo, k_hi], shape (K, N, dim)."""
    k = np.arange(k_lo, k_hi + 1, dtype=float)
    s = k[:, None] * h[None, :]
    return anchors[None, :, :] + s[:, :, None] * march[None, :, :]


def segment_simpson(values_at: Callable[[np.ndarray], np.ndarray],
                    anchors: np.ndarray,
                    march: np.ndarray,
                    lengths: np.ndarray,
                    n_panels: int) -> np.ndarray:
    """integral_0^L_i of g(anchor_i + s*march_i) ds for each ray i."""
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    march = np.broadcast_to(np.asarray(march, dtype=float), anchors.shape)
    lengths = np.atleast_1d(np.asarray(lengths, dtype=float))
    n_rays, dim = anchors.shape
    h = lengths / n_panels
    coeff = simpson_coefficients(n_panels)
    total = np.zeros(n_rays)
    for k_lo, k_hi in _k_chunks(n_panels, n_rays):
        pts = _sample_block(anchors, march, h, k_lo, k_hi)
        vals = values_at(pts.reshape(-1, dim)).reshape(k_hi - k_lo + 1, n_rays)
        total += coeff[k_lo:k_hi + 1] @ vals
    return total * h / 3.0


def attenuated_source_integral(
        absorption_at: Callable[[np.ndarray], np.ndarray],
        source_at: Optional[Callable[[np.ndarray], np.ndarray]],
        anchors: np.ndarray,
        march: np.ndarray,
        lengths: np.ndarray,
        n_panels: int) -> Tuple[Optional[np.ndarray], np.ndarray]:
    """integral_0^L exp(-D(s)) q(s) ds and the full optical depth D(L).

    D(s) accumulates ``absorption_at`` along the ray by the trapezoid rule
    (exact for absorption linear along the ray); the full depth D(L) and the
    outer integral use composite Simpson weights.  Returns
    (integral or None, full_depth).
    """
    anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
    march = np.broadcast_to(np.asarray(march, dtype=float), anchors.shape)
    lengths = np.atleast_1d(np.asarray(lengths, dtype=float))
    n_rays, dim = anchors.shape
    h = lengths / n_panels
    coeff = simpson_coefficients(n_panels)

    depth_carry = np.zeros(n_rays)
    simpson_depth = np.zeros(n_rays)
    integral = np.zeros(n_rays) if source_at is not None else None
    a_prev = None
    for k_lo, k_hi in _k_chunks(n_panels, n_rays):
        pts = _sample_block(anchors, march, h, k_lo, k_hi)
        flat = pts.reshape(-1, dim)
        rows = k_hi - k_lo + 1
        a_vals = absorption_at(flat).reshape(rows, n_rays)
        if k_lo == 0:
            block = a_vals
        else:
            block = np.vstack([a_prev[None, :], a_vals])
        depths = depth_carry + np.cumsum(0.5 * h * (block[1:] + block[:-1]), axis=0)
        simpson_depth += coeff[k_lo:k_hi + 1] @ a_vals
        if source_at is not None:
            q_vals = source_at(flat).reshape(rows, n_rays)
            if k_lo == 0:
                weighted = np.exp(-np.vstack([np.zeros(n_rays), depths])) * q_vals
            else:
                weighted = np.exp(-depths) * q_vals
            integral += coeff[k_lo:k_hi + 1] @ weighted
        depth_carry = depths[-1]
        a_prev = a_vals[-1]
    if integral is not None:
        integral = integral * h / 3.0
    return integral, simpson_depth * h / 3.0
