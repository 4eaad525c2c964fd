"""Forward-backward flow consistency: confidence, occlusion and splat weights."""
from __future__ import annotations

import numpy as np

from .core import PipelineConfig, pixel_grid, same_size, sample_bilinear
from .warp import backward_warp

# Largest float32 below 1: a nonzero residual must never round to full confidence.
_BELOW_ONE = float(np.nextafter(np.float32(1.0), np.float32(0.0)))
_TINY = float(np.finfo(np.float32).tiny)


def _round_trip(v_fwd, v_bwd):
    """Squared residual and squared magnitude sum of the forward-backward loop."""
    v_fwd = np.asarray(v_fwd, dtype=np.float64)
    same_size(v_fwd, v_bwd)
    h, w = v_fwd.shape[:2]
    xs, ys = pixel_grid(h, w)
    back = sample_bilinear(v_bwd, xs + v_fwd[..., 0], ys + v_fwd[..., 1])
    residual = np.sum((v_fwd + back) ** 2, axis=-1)
    magnitude = np.sum(v_fwd**2, axis=-1) + np.sum(back**2, axis=-1)
    return residual, magnitude


def confidence_exponent(v_fwd, v_bwd, cfg: PipelineConfig | None = None) -> np.ndarray:
    """Non-negative float64 exponent ``e`` with ``confidence = exp(-e)``."""
    cfg = cfg or PipelineConfig()
    residual, magnitude = _round_trip(v_fwd, v_bwd)
    return residual / (cfg.gamma1 * magnitude + cfg.gamma2)


def confidence_map(v_fwd, v_bwd, cfg: PipelineConfig | None = None) -> np.ndarray:
    """Per-pixel forward-backward confidence on the grid of ``v_fwd``.

    ``exp(-|f + b|^2 / (gamma1 * (|f|^2 + |b|^2) + gamma2))`` where ``b`` is
    ``v_bwd`` looked up bilinearly at ``x + f(x)``. Values lie in ``(0, 1]``
    and are exactly 1 only where the residual is exactly zero.
    """
    e = confidence_exponent(v_fwd, v_bwd, cfg)
    conf = np.exp(-e)
    conf = np.where(e > 0, np.clip(conf, _TINY, _BELOW_ONE), 1.0)
    return conf.astype(np.float32)


def occlusion_map(v_fwd, v_bwd, cfg: PipelineConfig | None = None) -> np.ndarray:
    """Binary occlusion mask (1 = occluded) on the grid of ``v_fwd``."""
    cfg = cfg or PipelineConfig()
    residual, magnitude = _round_trip(v_fwd, v_bwd)
    occluded = residual > cfg.occl_alpha1 * magnitude + cfg.occl_alpha2
    return occluded.astype(np.float32)


def occlusion_weight_mask(o_fwd, v_fwd, cfg: PipelineConfig | None = None) -> np.ndarray:
    """Splat priority ``alpha * (1 - O) * warp_b(O, V)`` for foreground pixels.

    Backward-warping the occlusion map along the forward flow lands occluded
    background onto the pixels that cover it, plus a ghost copy at the
    occluder's destination; multiplying by ``1 - O`` discards the ghost.
    """
    cfg = cfg or PipelineConfig()
    o_fwd = np.asarray(o_fwd, dtype=np.float32)
    same_size(o_fwd, v_fwd)
    warped = backward_warp(o_fwd, v_fwd)
    mask = cfg.alpha * (1.0 - o_fwd) * warped
    return np.clip(mask, 0.0, cfg.alpha).astype(np.float32)
