"""Frame and flow interpolation by occlusion-weighted forward splatting.

Pipeline for ``0 < t < 1``:

1. splat ``(1-t) * V01`` along ``t * V01`` with foreground priority from the
   occlusion weight mask to get ``V_t1``; symmetrically ``V_t0`` from ``V10``;
2. fill splat holes from the opposite intermediate flow assuming linear motion;
3. backward-warp both frames and blend them by forward-backward confidence.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .consistency import confidence_exponent, confidence_map, occlusion_map, occlusion_weight_mask
from .core import PipelineConfig, same_size
from .warp import SplatResult, backward_warp, softmax_splat


@dataclass(frozen=True)
class InterpolationOutput:
    frame_t: np.ndarray
    flow_t0: np.ndarray
    flow_t1: np.ndarray
    conf_t0: np.ndarray
    conf_t1: np.ndarray
    holes_t0: np.ndarray
    holes_t1: np.ndarray


@dataclass(frozen=True)
class FilledFlows:
    flow_t0: np.ndarray
    flow_t1: np.ndarray
    filled_t0: np.ndarray
    filled_t1: np.ndarray
    holes_t0: np.ndarray
    holes_t1: np.ndarray


def _check_t(t: float) -> float:
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must be in [0, 1], got {t}")
    return t


def _zero_flow_result(like) -> SplatResult:
    # At an endpoint the flow towards that same frame is identically zero;
    # splatting zeros would only add spurious holes.
    h, w = like.shape[:2]
    return SplatResult(np.zeros_like(like), np.ones((h, w)), np.zeros((h, w), np.float32))


def intermediate_flows(v01, v10, t: float, cfg: PipelineConfig | None = None) -> tuple[SplatResult, SplatResult]:
    """Splat ``V_t1`` and ``V_t0`` from the two full-span flows.

    Returns ``(flow_t1, flow_t0)`` as :class:`SplatResult` so the hole masks
    travel with the values.
    """
    cfg = cfg or PipelineConfig()
    t = _check_t(t)
    v01 = np.asarray(v01, dtype=np.float32)
    v10 = np.asarray(v10, dtype=np.float32)
    same_size(v01, v10)

    if t == 1.0:
        to_1 = _zero_flow_result(v01)
    else:
        m0 = occlusion_weight_mask(occlusion_map(v01, v10, cfg), v01, cfg)
        to_1 = softmax_splat(np.float32(1.0 - t) * v01, np.float32(t) * v01, m0, cfg)

    if t == 0.0:
        to_0 = _zero_flow_result(v10)
    else:
        m1 = occlusion_weight_mask(occlusion_map(v10, v01, cfg), v10, cfg)
        to_0 = softmax_splat(np.float32(t) * v10, np.float32(1.0 - t) * v10, m1, cfg)
    return to_1, to_0


def fill_holes(flow_t0, holes_t0, flow_t1, holes_t1, t: float) -> FilledFlows:
    """Fill splat holes of one intermediate flow from the other.

    Under linear motion ``V_t0 = -t / (1 - t) * V_t1``. Pixels that are holes
    in both flows stay zero and are reported in both residual masks.
    ``t`` must lie strictly inside ``(0, 1)``.
    """
    t = float(t)
    if not 0.0 < t < 1.0:
        raise ValueError(f"hole filling needs 0 < t < 1, got {t}")
    same_size(flow_t0, holes_t0, flow_t1, holes_t1)
    h0 = np.asarray(holes_t0) > 0.5
    h1 = np.asarray(holes_t1) > 0.5
    fill_0 = h0 & ~h1
    fill_1 = h1 & ~h0
    both = h0 & h1

    f0 = np.array(flow_t0, dtype=np.float32)
    f1 = np.array(flow_t1, dtype=np.float32)
    f0[fill_0] = np.float32(-(t / (1.0 - t))) * f1[fill_0]
    f1[fill_1] = np.float32(-((1.0 - t) / t)) * f0[fill_1]
    f0[both] = 0.0
    f1[both] = 0.0
    residual = both.astype(np.float32)
    return FilledFlows(f0, f1, fill_0, fill_1, residual, residual.copy())


def _fusion_weights(e0, e1, eps):
    """Normalised blend weights ``C0 / (C0 + C1 + eps)`` and ``C1 / (...)``.

    Both confidences are rescaled by their maximum first; the ratio is
    unchanged but it cannot collapse to ``0 / eps`` when both are tiny.
    """
    shift = np.minimum(e0, e1)
    c0 = np.exp(-(e0 - shift))
    c1 = np.exp(-(e1 - shift))
    total = c0 + c1 + eps
    return c0 / total, c1 / total


def fuse(i0, i1, flow_t0, flow_t1, v01, v10, t: float, cfg: PipelineConfig | None = None):
    """Confidence-weighted blend of the two backward-warped frames.

    Returns ``(frame_t, conf_t0, conf_t1)``; confidences compare each
    intermediate flow against the linear flow from the matching endpoint.
    """
    cfg = cfg or PipelineConfig()
    t = _check_t(t)
    same_size(i0, i1, flow_t0, flow_t1, v01, v10)
    v0t = t * np.asarray(v01, dtype=np.float64)
    v1t = (1.0 - t) * np.asarray(v10, dtype=np.float64)

    e0 = confidence_exponent(flow_t0, v0t, cfg)
    e1 = confidence_exponent(flow_t1, v1t, cfg)
    w0, w1 = _fusion_weights(e0, e1, cfg.fusion_eps)

    warped_0 = backward_warp(np.asarray(i0, dtype=np.float64), flow_t0)
    warped_1 = backward_warp(np.asarray(i1, dtype=np.float64), flow_t1)
    frame = w0[..., None] * warped_0 + w1[..., None] * warped_1
    frame = np.clip(frame, 0.0, 1.0).astype(np.float32)
    return frame, confidence_map(flow_t0, v0t, cfg), confidence_map(flow_t1, v1t, cfg)


def interpolate(i0, i1, v01, v10, t: float, cfg: PipelineConfig | None = None) -> InterpolationOutput:
    """Synthesise the frame, flows and confidences at time ``t``."""
    cfg = cfg or PipelineConfig()
    t = _check_t(t)
    i0 = np.asarray(i0)
    i1 = np.asarray(i1)
    v01 = np.asarray(v01, dtype=np.float32)
    v10 = np.asarray(v10, dtype=np.float32)
    h, w = same_size(i0, i1, v01, v10)
    no_holes = np.zeros((h, w), np.float32)
    zero = np.zeros_like(v01)

    if t == 0.0 or t == 1.0:
        frame, flow_t0, flow_t1 = (i0.copy(), zero, v01.copy()) if t == 0.0 else (i1.copy(), v10.copy(), zero)
        return InterpolationOutput(
            frame_t=frame,
            flow_t0=flow_t0,
            flow_t1=flow_t1,
            conf_t0=confidence_map(flow_t0, t * v01, cfg),
            conf_t1=confidence_map(flow_t1, (1.0 - t) * v10, cfg),
            holes_t0=no_holes,
            holes_t1=no_holes.copy(),
        )

    to_1, to_0 = intermediate_flows(v01, v10, t, cfg)
    filled = fill_holes(to_0.values, to_0.holes, to_1.values, to_1.holes, t)
    frame, conf_t0, conf_t1 = fuse(i0, i1, filled.flow_t0, filled.flow_t1, v01, v10, t, cfg)

    both = filled.holes_t0 > 0.5
    if both.any():
        blend = (1.0 - t) * i0.astype(np.float64) + t * i1.astype(np.float64)
        frame[both] = np.clip(blend[both], 0.0, 1.0)

    return InterpolationOutput(
        frame_t=frame.astype(np.float32),
        flow_t0=filled.flow_t0,
        flow_t1=filled.flow_t1,
        conf_t0=conf_t0,
        conf_t1=conf_t1,
        holes_t0=filled.holes_t0,
        holes_t1=filled.holes_t1,
    )


def single_sided_baseline(i0, i1, v01, v10, t: float, cfg: PipelineConfig | None = None) -> np.ndarray:
    """Ablation reference: warp ``I0`` only, blend ``(1-t) I0 + t I1`` in holes.

    Uses the splatted ``V_t0`` without flow hole filling or confidence fusion.
    """
    cfg = cfg or PipelineConfig()
    t = _check_t(t)
    if t in (0.0, 1.0):
        return np.asarray(i0 if t == 0.0 else i1, dtype=np.float32).copy()
    _, to_0 = intermediate_flows(v01, v10, t, cfg)
    frame = backward_warp(np.asarray(i0, dtype=np.float64), to_0.values)
    holes = to_0.hole_mask
    blend = (1.0 - t) * np.asarray(i0, dtype=np.float64) + t * np.asarray(i1, dtype=np.float64)
    frame[holes] = blend[holes]
    return np.clip(frame, 0.0, 1.0).astype(np.float32)
