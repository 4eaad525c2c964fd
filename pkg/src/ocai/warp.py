"""Backward warping and softmax forward splatting."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PipelineConfig, pixel_grid, same_size, sample_bilinear


@dataclass(frozen=True)
class SplatResult:
    """Output of :func:`softmax_splat`.

    Attributes:
        values: splatted raster, same channel layout and dtype as the source.
        mass: float64 ``(H, W)`` map of ``sum_q exp(weight(q)) * b(u)``.
        holes: float32 ``(H, W)`` map, 1 where ``mass < hole_eps``.
    """

    values: np.ndarray
    mass: np.ndarray
    holes: np.ndarray

    @property
    def hole_mask(self) -> np.ndarray:
        return self.holes > 0.5


def backward_warp(src, flow) -> np.ndarray:
    """Sample ``src`` at ``x + flow(x)`` for every target pixel ``x``.

    Works for images and flow fields alike; out-of-range lookups clamp to the
    border. The result keeps the dtype of ``src``.
    """
    src = np.asarray(src)
    flow = np.asarray(flow)
    h, w = same_size(src, flow)
    xs, ys = pixel_grid(h, w)
    out = sample_bilinear(src, xs + flow[..., 0], ys + flow[..., 1])
    return out.astype(src.dtype if np.issubdtype(src.dtype, np.floating) else np.float32)


def _splat_taps(flow):
    """Bilinear footprint of every source pixel displaced by ``flow``.

    Returns ``(source_index, target_index, kernel)`` for the taps that land
    inside the raster with a strictly positive kernel value.
    """
    h, w = flow.shape[:2]
    xs, ys = pixel_grid(h, w)
    px = (xs + flow[..., 0]).ravel()
    py = (ys + flow[..., 1]).ravel()
    x0 = np.floor(px)
    y0 = np.floor(py)
    fx = px - x0
    fy = py - y0
    source = np.arange(h * w)
    src_idx, tgt_idx, kern = [], [], []
    for dx, dy, k in (
        (0, 0, (1.0 - fx) * (1.0 - fy)),
        (1, 0, fx * (1.0 - fy)),
        (0, 1, (1.0 - fx) * fy),
        (1, 1, fx * fy),
    ):
        tx = x0 + dx
        ty = y0 + dy
        keep = (k > 0) & (tx >= 0) & (tx <= w - 1) & (ty >= 0) & (ty <= h - 1)
        src_idx.append(source[keep])
        tgt_idx.append(ty[keep].astype(np.intp) * w + tx[keep].astype(np.intp))
        kern.append(k[keep])
    return np.concatenate(src_idx), np.concatenate(tgt_idx), np.concatenate(kern)


def softmax_splat(src, flow, weight, cfg: PipelineConfig | None = None) -> SplatResult:
    """Forward-warp ``src`` along ``flow`` with softmax weights ``exp(weight)``.

    Each target pixel receives the ``exp(weight)``-weighted mean of every
    source whose displaced bilinear kernel overlaps it. Weights are shifted
    by the per-target maximum before exponentiation, so weights up to 100 and
    beyond stay finite; the shift cancels in the ratio. Accumulation is a
    sequential float64 ``bincount``, which keeps results bitwise reproducible.
    """
    cfg = cfg or PipelineConfig()
    src = np.asarray(src)
    flow = np.asarray(flow, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    h, w = same_size(src, flow, weight)
    n = h * w
    channels = src.reshape(n, -1).astype(np.float64)

    s_idx, t_idx, kern = _splat_taps(flow)
    wq = weight.ravel()[s_idx]

    peak = np.full(n, -np.inf)
    np.maximum.at(peak, t_idx, wq)
    e = np.exp(wq - peak[t_idx]) * kern
    denom = np.bincount(t_idx, weights=e, minlength=n)

    reached = np.isfinite(peak)
    mass = np.zeros(n)
    mass[reached] = np.exp(peak[reached]) * denom[reached]
    holes = mass < cfg.hole_eps

    out = np.zeros_like(channels)
    safe = np.where(holes, 1.0, denom)
    for c in range(channels.shape[1]):
        num = np.bincount(t_idx, weights=e * channels[s_idx, c], minlength=n)
        out[:, c] = np.where(holes, 0.0, num / safe)

    out_dtype = src.dtype if np.issubdtype(src.dtype, np.floating) else np.float32
    return SplatResult(
        values=out.reshape(src.shape).astype(out_dtype),
        mass=mass.reshape(h, w),
        holes=holes.reshape(h, w).astype(np.float32),
    )
