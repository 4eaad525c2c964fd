"""Image quality metrics, flow errors and semi-supervision arithmetic."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import correlate2d

from .core import same_size

PSNR_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class MetricReport:
    psnr: float
    ssim: float
    pixel_count: int


def _as_hwc(img) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    return arr[..., None] if arr.ndim == 2 else arr


def psnr(ref, test, mask=None) -> float:
    """Peak signal-to-noise ratio in dB for images on the ``[0, 1]`` scale.

    ``mask`` (``H x W`` bool) restricts the mean squared error to selected
    pixels. Returns :data:`PSNR_CAP` when the error is below ``1e-12``.
    """
    ref = _as_hwc(ref)
    test = _as_hwc(test)
    if ref.shape != test.shape:
        raise ValueError(f"image shapes differ: {ref.shape} vs {test.shape}")
    sq = (ref - test) ** 2
    if mask is not None:
        sq = sq[np.asarray(mask, dtype=bool)]
    mse = float(np.mean(sq)) if sq.size else 0.0
    if mse < 1e-12:
        return PSNR_CAP
    return 10.0 * math.log10(1.0 / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2
    g = np.exp(-(ax**2) / (2 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


def ssim_map(ref, test, data_range: float = 1.0) -> np.ndarray:
    """Local SSIM at every valid window centre, shape ``(H-10, W-10, C)``."""
    ref = _as_hwc(ref)
    test = _as_hwc(test)
    if ref.shape != test.shape:
        raise ValueError(f"image shapes differ: {ref.shape} vs {test.shape}")
    if min(ref.shape[:2]) < SSIM_WINDOW:
        raise ValueError(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {ref.shape[:2]}")
    win = gaussian_window()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2

    def filt(a):
        return correlate2d(a, win, mode="valid")

    out = []
    for c in range(ref.shape[2]):
        x = ref[..., c]
        y = test[..., c]
        mx, my = filt(x), filt(y)
        sxx = filt(x * x) - mx * mx
        syy = filt(y * y) - my * my
        sxy = filt(x * y) - mx * my
        num = (2 * mx * my + c1) * (2 * sxy + c2)
        den = (mx * mx + my * my + c1) * (sxx + syy + c2)
        out.append(num / den)
    return np.stack(out, axis=-1)


def ssim(ref, test) -> float:
    """Mean SSIM (11x11 Gaussian window, sigma 1.5, K1=0.01, K2=0.03, range 1)."""
    return float(np.clip(np.mean(ssim_map(ref, test)), -1.0, 1.0))


def report(ref, test) -> MetricReport:
    ref = _as_hwc(ref)
    return MetricReport(psnr=psnr(ref, test), ssim=ssim(ref, test), pixel_count=ref.shape[0] * ref.shape[1])


def masked_l1_loss(pred, target, conf, tau: float = 0.95) -> tuple[float, int]:
    """Mean per-pixel ``|du| + |dv|`` over pixels whose confidence is ``>= tau``.

    Returns ``(loss, valid_count)``; the loss is 0 when no pixel is valid.
    """
    same_size(pred, target, conf)
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    valid = np.asarray(conf) >= tau
    count = int(valid.sum())
    if count == 0:
        return 0.0, 0
    l1 = np.abs(pred - target).sum(axis=-1)
    return float(l1[valid].mean()), count


def endpoint_error(pred, target, mask=None) -> tuple[float, float]:
    """Average endpoint error (px) and KITTI Fl-all outlier percentage.

    A pixel is an outlier when its endpoint error exceeds both 3 px and 5% of
    the ground-truth flow magnitude.
    """
    same_size(pred, target)
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    err = np.linalg.norm(pred - target, axis=-1)
    mag = np.linalg.norm(target, axis=-1)
    if mask is not None:
        same_size(pred, mask)
        sel = np.asarray(mask, dtype=bool)
        err, mag = err[sel], mag[sel]
    if err.size == 0:
        return 0.0, 0.0
    outlier = (err > 3.0) & (err > 0.05 * mag)
    return float(err.mean()), float(100.0 * outlier.mean())


def ema_update(teacher, student, decay: float) -> np.ndarray:
    """``decay * teacher + (1 - decay) * student``, elementwise."""
    teacher = np.asarray(teacher, dtype=np.float64)
    student = np.asarray(student, dtype=np.float64)
    if teacher.shape != student.shape:
        raise ValueError(f"parameter vectors differ in shape: {teacher.shape} vs {student.shape}")
    if not 0.0 <= decay <= 1.0:
        raise ValueError(f"decay must be in [0, 1], got {decay}")
    return decay * teacher + (1.0 - decay) * student


def distract_mix(i0, distractor, lam: float) -> np.ndarray:
    """Convex mix ``lam * i0 + (1 - lam) * distractor``."""
    i0 = np.asarray(i0)
    distractor = np.asarray(distractor)
    if i0.shape != distractor.shape:
        raise ValueError(f"image shapes differ: {i0.shape} vs {distractor.shape}")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must be in [0, 1], got {lam}")
    mixed = lam * i0.astype(np.float64) + (1.0 - lam) * distractor.astype(np.float64)
    return np.clip(mixed, 0.0, 1.0).astype(np.float32)


def total_loss(sup: float, self_loss: float, w: float = 1.0) -> float:
    if w < 0:
        raise ValueError(f"w must be >= 0, got {w}")
    return sup + w * self_loss
