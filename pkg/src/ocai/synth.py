"""Analytic scenes of translating disks and rectangles.

Every shape moves linearly, ``center(t) = center + t * displacement``, over a
static background, so frames, flows and occlusions at any time are known in
closed form. Smaller ``depth`` means closer to the camera.

Scene files are plain text, one ``key=value`` setting per line, ``#`` starts
a comment::

    width=128
    height=96
    background=0.2            # base[,dI/dx,dI/dy]
    noise=0.02                # optional static background noise amplitude
    seed=7
    shape kind=disk center=40,48 size=10 intensity=0.9 displacement=30,0 depth=0
    shape kind=rectangle center=90,30 size=8,5 intensity=0.6 displacement=-12,6 depth=1

``size`` is the radius of a disk or the half extent(s) of a rectangle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

SUPERSAMPLE = 4
SHAPE_KINDS = ("disk", "rectangle")


class SceneSpecError(ValueError):
    """Malformed or invalid scene description; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, shape_index: int | None = None):
        self.line = line
        self.shape_index = shape_index
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Shape:
    kind: str
    center: tuple[float, float]
    size: tuple[float, float]
    intensity: float
    displacement: tuple[float, float]
    depth: int

    def position(self, t: float) -> tuple[float, float]:
        return (self.center[0] + t * self.displacement[0], self.center[1] + t * self.displacement[1])

    def covers(self, xs, ys, t: float) -> np.ndarray:
        cx, cy = self.position(t)
        if self.kind == "disk":
            return (xs - cx) ** 2 + (ys - cy) ** 2 <= self.size[0] ** 2
        return (np.abs(xs - cx) <= self.size[0]) & (np.abs(ys - cy) <= self.size[1])

    def extent(self, t: float) -> tuple[float, float, float, float]:
        cx, cy = self.position(t)
        rx, ry = (self.size[0], self.size[0]) if self.kind == "disk" else self.size
        return cx - rx, cy - ry, cx + rx, cy + ry


@dataclass(frozen=True)
class SyntheticScene:
    width: int
    height: int
    shapes: tuple[Shape, ...] = ()
    background: tuple[float, float, float] = (0.2, 0.0, 0.0)
    noise: float = 0.0
    seed: int = 0
    _noise_field: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "shapes", tuple(self.shapes))
        bg = tuple(float(v) for v in self.background)
        object.__setattr__(self, "background", bg + (0.0,) * (3 - len(bg)))
        self.check()
        if self.noise > 0:
            rng = np.random.default_rng(self.seed)
            field_ = rng.uniform(-self.noise, self.noise, (self.height, self.width))
            object.__setattr__(self, "_noise_field", field_)

    def check(self) -> None:
        if self.width < 1 or self.height < 1:
            raise SceneSpecError(f"invalid size {self.width}x{self.height}")
        limit = min(self.width, self.height) / 2
        depths = [s.depth for s in self.shapes]
        if len(set(depths)) != len(depths):
            raise SceneSpecError(f"depth ranks must be distinct, got {depths}")
        for i, s in enumerate(self.shapes):
            if s.kind not in SHAPE_KINDS:
                raise SceneSpecError(f"shape {i}: unknown kind {s.kind!r}", shape_index=i)
            if min(s.size) <= 0:
                raise SceneSpecError(f"shape {i}: size must be positive", shape_index=i)
            if not 0.0 <= s.intensity <= 1.0:
                raise SceneSpecError(f"shape {i}: intensity must be in [0, 1]", shape_index=i)
            if math.hypot(*s.displacement) > limit:
                raise SceneSpecError(f"shape {i}: displacement longer than min(W, H)/2 = {limit}", shape_index=i)
            for t in (0.0, 1.0):
                x0, y0, x1, y1 = s.extent(t)
                if x0 < 0 or y0 < 0 or x1 > self.width - 1 or y1 > self.height - 1:
                    raise SceneSpecError(f"shape {i}: crosses the frame border at t={t:g}", shape_index=i)
        lo, hi = self._background_range()
        if lo < 0 or hi > 1:
            raise SceneSpecError("background intensity leaves [0, 1]")

    def _background_range(self) -> tuple[float, float]:
        base, gx, gy = self.background
        corners = [base + gx * x + gy * y for x in (0, self.width - 1) for y in (0, self.height - 1)]
        return min(corners) - self.noise, max(corners) + self.noise

    def by_depth(self) -> list[Shape]:
        """Shapes from back to front."""
        return sorted(self.shapes, key=lambda s: -s.depth)


def _surface_index(scene: SyntheticScene, xs, ys, t: float) -> np.ndarray:
    """Closest shape touching the pixel-sized cell centred on each point, -1 for background.

    A shape touches a cell when it covers any of the cell's render subsamples,
    so anti-aliased edge pixels belong to (and move with) the shape that
    produced the edge.
    """
    index = np.full(np.shape(xs), -1, dtype=np.intp)
    rank = np.full(np.shape(xs), np.inf)
    for i, s in enumerate(scene.shapes):
        hit = _touches(s, xs, ys, t) & (s.depth < rank)
        index[hit] = i
        rank[hit] = s.depth
    return index


def _touches(shape: Shape, xs, ys, t: float) -> np.ndarray:
    touched = np.zeros(np.shape(xs), dtype=bool)
    offsets = _subsample_offsets()
    for oy in offsets:
        for ox in offsets:
            touched |= shape.covers(xs + ox, ys + oy, t)
    return touched


def _depth_at(scene: SyntheticScene, index: np.ndarray) -> np.ndarray:
    depths = np.array([s.depth for s in scene.shapes] + [np.inf], dtype=np.float64)
    return depths[index]


def render(scene: SyntheticScene, t: float) -> np.ndarray:
    """Grayscale ``H x W x 1`` frame at time ``t`` with 4x4 supersampling."""
    n = SUPERSAMPLE
    offsets = _subsample_offsets()
    ys, xs = np.mgrid[0 : scene.height, 0 : scene.width].astype(np.float64)
    base, gx, gy = scene.background
    acc = np.zeros((scene.height, scene.width))
    for oy in offsets:
        for ox in offsets:
            sx = xs + ox
            sy = ys + oy
            value = base + gx * sx + gy * sy
            if scene._noise_field is not None:
                value = value + scene._noise_field
            for s in scene.by_depth():
                value = np.where(s.covers(sx, sy, t), s.intensity, value)
            acc += value
    return np.clip(acc / (n * n), 0.0, 1.0)[..., None].astype(np.float32)


def _subsample_offsets() -> np.ndarray:
    return (np.arange(SUPERSAMPLE) + 0.5) / SUPERSAMPLE - 0.5


def surface_map(scene: SyntheticScene, t: float) -> np.ndarray:
    """Per-pixel index of the closest shape touching the pixel (-1 = background)."""
    ys, xs = np.mgrid[0 : scene.height, 0 : scene.width].astype(np.float64)
    return _surface_index(scene, xs, ys, t)


def _displacements(scene: SyntheticScene) -> np.ndarray:
    return np.array([s.displacement for s in scene.shapes] + [(0.0, 0.0)], dtype=np.float64).reshape(-1, 2)


def ground_truth_flow(scene: SyntheticScene, t_from: float, t_to: float) -> np.ndarray:
    """Exact flow from time ``t_from`` to ``t_to`` on the ``t_from`` grid."""
    flow = (t_to - t_from) * _displacements(scene)[surface_map(scene, t_from)]
    return flow.astype(np.float32)


def ground_truth_occlusion(scene: SyntheticScene, t_from: float, t_to: float) -> np.ndarray:
    """1 where a pixel at ``t_from`` is hidden at ``t_to`` by a closer surface.

    Brute-force visibility test: follow each pixel along its exact flow and
    compare its depth rank with that of the surface visible there at ``t_to``.
    """
    ys, xs = np.mgrid[0 : scene.height, 0 : scene.width].astype(np.float64)
    own = surface_map(scene, t_from)
    flow = (t_to - t_from) * _displacements(scene)[own]
    there = _surface_index(scene, xs + flow[..., 0], ys + flow[..., 1], t_to)
    occluded = _depth_at(scene, there) < _depth_at(scene, own)
    return occluded.astype(np.float32)


def occlusion_boundary_band(scene: SyntheticScene, t: float, width: int = 2) -> np.ndarray:
    """Pixels within ``width`` px (chessboard distance) of a boundary at time ``t``.

    Boundaries separate pixels that differ in visible surface or in whether
    they are occluded towards frame 0 or frame 1.
    """
    labels = np.stack(
        [
            surface_map(scene, t),
            ground_truth_occlusion(scene, t, 0.0).astype(np.intp),
            ground_truth_occlusion(scene, t, 1.0).astype(np.intp),
        ],
        axis=-1,
    )
    edge = np.zeros(labels.shape[:2], dtype=bool)
    dy = np.any(labels[1:] != labels[:-1], axis=-1)
    dx = np.any(labels[:, 1:] != labels[:, :-1], axis=-1)
    edge[1:] |= dy
    edge[:-1] |= dy
    edge[:, 1:] |= dx
    edge[:, :-1] |= dx
    if width <= 0:
        return edge
    return ndimage.binary_dilation(edge, structure=np.ones((2 * width + 1, 2 * width + 1), dtype=bool))


def footprint(scene: SyntheticScene, shape_index: int, t: float) -> np.ndarray:
    """Pixels one shape touches at time ``t``, ignoring occluders.

    Uses the same coverage rule as :func:`surface_map`: a pixel belongs to
    the shape if any of its render subsamples lies inside it.
    """
    ys, xs = np.mgrid[0 : scene.height, 0 : scene.width].astype(np.float64)
    return _touches(scene.shapes[shape_index], xs, ys, t)


def disk_scene(width: int = 128, height: int = 96, radius: float = 12.0, displacement=(40.0, 0.0)) -> SyntheticScene:
    """A single bright disk moving right over a static dark background."""
    center = ((width - 1) / 2 - displacement[0] / 2, (height - 1) / 2 - displacement[1] / 2)
    return SyntheticScene(
        width=width,
        height=height,
        background=(0.2, 0.0, 0.0),
        shapes=(Shape("disk", center, (radius, radius), 0.85, tuple(map(float, displacement)), 0),),
    )


def random_scene(
    rng: np.random.Generator,
    width: int = 128,
    height: int = 128,
    max_shapes: int = 3,
    max_displacement_frac: float = 0.25,
    displacement_step: float | None = None,
) -> SyntheticScene:
    """Random valid scene with 1..max_shapes shapes; resamples until one fits.

    With ``displacement_step`` every displacement component is a multiple of
    that step (a step of 10 keeps ``t * d`` on the pixel grid for every
    ``t`` that is a multiple of 0.1).
    """
    max_disp = max_displacement_frac * width
    n_shapes = int(rng.integers(1, max_shapes + 1))
    shapes = []
    depths = rng.permutation(n_shapes)
    for depth in depths:
        for _ in range(1000):
            kind = SHAPE_KINDS[int(rng.integers(0, 2))]
            if kind == "disk":
                r = float(rng.uniform(5, 16))
                size = (r, r)
            else:
                size = (float(rng.uniform(4, 14)), float(rng.uniform(4, 14)))
            angle = rng.uniform(0, 2 * np.pi)
            mag = rng.uniform(0, max_disp)
            disp = (float(mag * np.cos(angle)), float(mag * np.sin(angle)))
            if displacement_step:
                disp = tuple(float(displacement_step * np.round(c / displacement_step)) for c in disp)
                if math.hypot(*disp) > max_disp:
                    continue
            if 2 * size[0] + abs(disp[0]) > width - 3 or 2 * size[1] + abs(disp[1]) > height - 3:
                continue
            cx = rng.uniform(size[0] + max(0, -disp[0]) + 1, width - 2 - size[0] - max(0, disp[0]))
            cy = rng.uniform(size[1] + max(0, -disp[1]) + 1, height - 2 - size[1] - max(0, disp[1]))
            shapes.append(Shape(kind, (float(cx), float(cy)), size, float(rng.uniform(0.5, 1.0)), disp, int(depth)))
            break
    background = (float(rng.uniform(0.05, 0.35)), 0.0, 0.0)
    return SyntheticScene(width=width, height=height, shapes=tuple(shapes), background=background)


def _pair(text: str, line: int) -> tuple[float, float]:
    parts = text.split(",")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise SceneSpecError(f"expected numbers, got {text!r}", line) from None
    if len(values) == 1:
        return values[0], values[0]
    if len(values) != 2:
        raise SceneSpecError(f"expected one or two comma-separated numbers, got {text!r}", line)
    return values[0], values[1]


def _parse_shape(tokens: list[str], line: int) -> Shape:
    attrs = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep:
            raise SceneSpecError(f"expected key=value, got {tok!r}", line)
        attrs[key] = value
    required = {"kind", "center", "size", "intensity", "displacement", "depth"}
    missing = required - attrs.keys()
    if missing:
        raise SceneSpecError(f"shape missing {sorted(missing)}", line)
    unknown = attrs.keys() - required
    if unknown:
        raise SceneSpecError(f"unknown shape keys {sorted(unknown)}", line)
    if attrs["kind"] not in SHAPE_KINDS:
        raise SceneSpecError(f"unknown shape kind {attrs['kind']!r}", line)
    try:
        intensity = float(attrs["intensity"])
        depth = int(attrs["depth"])
    except ValueError as exc:
        raise SceneSpecError(str(exc), line) from None
    size = _pair(attrs["size"], line)
    if attrs["kind"] == "disk" and size[0] != size[1]:
        raise SceneSpecError("disk takes a single radius", line)
    return Shape(attrs["kind"], _pair(attrs["center"], line), size, intensity, _pair(attrs["displacement"], line), depth)


def parse_scene(text: str) -> SyntheticScene:
    """Build a scene from the key=value text format described in the module doc."""
    settings: dict[str, tuple[str, int]] = {}
    shapes = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("shape"):
            tokens = line.split()
            if tokens[0] != "shape":
                raise SceneSpecError(f"unrecognised line {raw.strip()!r}", lineno)
            shapes.append((_parse_shape(tokens[1:], lineno), lineno))
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in ("width", "height", "background", "noise", "seed"):
            raise SceneSpecError(f"unrecognised line {raw.strip()!r}", lineno)
        settings[key] = (value.strip(), lineno)

    for key in ("width", "height"):
        if key not in settings:
            raise SceneSpecError(f"missing {key}")

    def number(key, cast, default):
        if key not in settings:
            return default
        value, lineno = settings[key]
        try:
            return cast(value)
        except ValueError:
            raise SceneSpecError(f"{key} is not a valid number: {value!r}", lineno) from None

    background = (0.2, 0.0, 0.0)
    if "background" in settings:
        value, lineno = settings["background"]
        try:
            background = tuple(float(v) for v in value.split(","))
        except ValueError:
            raise SceneSpecError(f"background is not numeric: {value!r}", lineno) from None
        if len(background) not in (1, 3):
            raise SceneSpecError("background takes base or base,dI/dx,dI/dy", lineno)

    kwargs = dict(
        width=number("width", int, None),
        height=number("height", int, None),
        background=background,
        noise=number("noise", float, 0.0),
        seed=number("seed", int, 0),
    )
    try:
        return SyntheticScene(shapes=tuple(s for s, _ in shapes), **kwargs)
    except SceneSpecError as exc:
        if exc.line is None and exc.shape_index is not None:
            raise SceneSpecError(str(exc), shapes[exc.shape_index][1], exc.shape_index) from None
        raise


def load_scene(path) -> SyntheticScene:
    return parse_scene(Path(path).read_text())


def format_scene(scene: SyntheticScene) -> str:
    """Inverse of :func:`parse_scene`."""

    def pair(p):
        return f"{p[0]!r},{p[1]!r}"

    lines = [
        f"width={scene.width}",
        f"height={scene.height}",
        "background=" + ",".join(repr(v) for v in scene.background),
        f"noise={scene.noise!r}",
        f"seed={scene.seed}",
    ]
    for s in scene.shapes:
        size = repr(s.size[0]) if s.kind == "disk" else pair(s.size)
        lines.append(
            f"shape kind={s.kind} center={pair(s.center)} size={size} intensity={s.intensity!r} "
            f"displacement={pair(s.displacement)} depth={s.depth}"
        )
    return "\n".join(lines) + "\n"
