"""Raster conventions, configuration and bilinear sampling.

Rasters are plain numpy arrays with the origin at the top-left pixel and
``(x, y) = (column, row)``:

* images: ``(H, W, C)`` float32 in ``[0, 1]``, ``C`` in ``{1, 3}``
* flows: ``(H, W, 2)`` float32, ``(u, v)`` in pixels, ``u`` rightward, ``v`` downward
* scalar maps (confidence, occlusion, weight, mass): ``(H, W)``
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

SCALAR_KINDS = ("confidence", "occlusion", "weight", "mass")


class ShapeMismatchError(ValueError):
    """Rasters passed to one operation do not share ``H x W``."""


@dataclass(frozen=True)
class PipelineConfig:
    alpha: float = 50.0
    gamma1: float = 0.01
    gamma2: float = 0.5
    occl_alpha1: float = 0.01
    occl_alpha2: float = 0.5
    hole_eps: float = 1e-7
    fusion_eps: float = 1e-12
    tau: float = 0.95

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"{f.name} must be a finite number, got {value!r}")
        if not 0.0 < self.alpha <= 100.0:
            raise ValueError(f"alpha must be in (0, 100], got {self.alpha}")
        for name in ("gamma1", "gamma2", "occl_alpha1", "occl_alpha2", "hole_eps", "fusion_eps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must be in [0, 1], got {self.tau}")

    def updated(self, **overrides) -> "PipelineConfig":
        """Copy with the non-None overrides applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    @classmethod
    def parse_text(cls, text: str) -> dict[str, float]:
        """Parse ``key=value`` lines into overrides without validating them.

        ``#`` starts a comment and blank lines are skipped.
        """
        known = {f.name for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or key not in known:
                raise ValueError(f"config line {lineno}: expected one of {sorted(known)} as key=value, got {raw!r}")
            try:
                values[key] = float(value)
            except ValueError:
                raise ValueError(f"config line {lineno}: {key} is not a number: {value.strip()!r}") from None
        return values

    @classmethod
    def from_text(cls, text: str, base: "PipelineConfig | None" = None) -> "PipelineConfig":
        return replace(base or cls(), **cls.parse_text(text))

    @classmethod
    def from_file(cls, path, base: "PipelineConfig | None" = None) -> "PipelineConfig":
        return cls.from_text(Path(path).read_text(), base)


def validate(buffer, kind: str) -> str | None:
    """Check a raster against the invariants of ``kind``.

    ``kind`` is ``"image"``, ``"flow"`` or one of :data:`SCALAR_KINDS`.
    Returns ``None`` when every invariant holds, otherwise a description of
    the first one violated.
    """
    arr = np.asarray(buffer)
    if kind == "image":
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            return f"image must be H x W x C with C in {{1, 3}}, got shape {arr.shape}"
    elif kind == "flow":
        if arr.ndim != 3 or arr.shape[2] != 2:
            return f"flow must be H x W x 2, got shape {arr.shape}"
    elif kind in SCALAR_KINDS:
        if arr.ndim != 2:
            return f"{kind} map must be H x W, got shape {arr.shape}"
    else:
        raise ValueError(f"unknown raster kind {kind!r}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        return f"empty raster of shape {arr.shape}"
    if not np.issubdtype(arr.dtype, np.number):
        return f"non-numeric dtype {arr.dtype}"
    if not np.all(np.isfinite(arr)):
        return "non-finite value"
    if kind == "image":
        if arr.min() < 0:
            return "intensity < 0"
        if arr.max() > 1:
            return "intensity > 1"
    elif kind == "confidence":
        if arr.min() <= 0:
            return "confidence <= 0"
        if arr.max() > 1:
            return "confidence > 1"
    elif kind == "occlusion":
        if arr.min() < 0:
            return "occlusion < 0"
        if arr.max() > 1:
            return "occlusion > 1"
    elif kind in ("weight", "mass"):
        if arr.min() < 0:
            return f"{kind} < 0"
    return None


def check(buffer, kind: str) -> None:
    """Like :func:`validate` but raises ``ValueError`` on a violation."""
    problem = validate(buffer, kind)
    if problem is not None:
        raise ValueError(problem)


def same_size(*rasters) -> tuple[int, int]:
    """Return the shared ``(H, W)`` or raise :class:`ShapeMismatchError`."""
    sizes = {tuple(np.shape(r)[:2]) for r in rasters}
    if len(sizes) != 1:
        raise ShapeMismatchError(f"rasters differ in size: {sorted(sizes)}")
    return sizes.pop()


def sample_bilinear(arr, xs, ys) -> np.ndarray:
    """Bilinear lookup of ``arr`` (``H x W`` or ``H x W x C``) at float positions.

    Positions outside the raster are clamped to the border. Returns float64
    with shape ``xs.shape`` (plus the channel axis if ``arr`` has one).
    """
    arr = np.asarray(arr)
    h, w = arr.shape[:2]
    x = np.clip(np.asarray(xs, dtype=np.float64), 0.0, w - 1)
    y = np.clip(np.asarray(ys, dtype=np.float64), 0.0, h - 1)
    x0 = np.minimum(np.floor(x).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(y).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    if arr.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    src = arr.astype(np.float64, copy=False)
    top = src[y0, x0] * (1.0 - fx) + src[y0, x1] * fx
    bottom = src[y1, x0] * (1.0 - fx) + src[y1, x1] * fx
    return top * (1.0 - fy) + bottom * fy


def bilinear_sample(img, x: float, y: float) -> np.ndarray:
    """Channel vector of ``img`` at ``(x, y)``, clamp-to-edge."""
    img = np.asarray(img)
    out = sample_bilinear(img if img.ndim == 3 else img[..., None], np.array(x), np.array(y))
    return out.reshape(-1)


def pixel_grid(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    """Float64 ``(xs, ys)`` coordinate grids of shape ``(h, w)``."""
    ys, xs = np.mgrid[0:h, 0:w]
    return xs.astype(np.float64), ys.astype(np.float64)
