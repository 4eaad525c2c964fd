"""Middlebury .flo and 8-bit image codecs, plus flow colour coding."""
from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np
from PIL import Image

FLO_MAGIC = 202021.25
_FLO_MAGIC_BYTES = struct.pack("<f", FLO_MAGIC)


class FlowFormatError(ValueError):
    pass


class ImageFormatError(ValueError):
    pass


# .flo -------------------------------------------------------------------


def read_flo(data: bytes) -> np.ndarray:
    """Decode a Middlebury .flo byte string into an ``(H, W, 2)`` float32 array."""
    if len(data) < 4 or data[:4] != _FLO_MAGIC_BYTES:
        raise FlowFormatError("not a .flo file")
    if len(data) < 12:
        raise FlowFormatError("unexpected EOF")
    width, height = struct.unpack("<ii", data[4:12])
    if width <= 0 or height <= 0:
        raise FlowFormatError(f"invalid header: width={width} height={height}")
    n = 2 * width * height
    payload = data[12:]
    if len(payload) < 4 * n:
        raise FlowFormatError("unexpected EOF")
    if len(payload) > 4 * n:
        raise FlowFormatError(f"trailing data: {len(payload) - 4 * n} bytes after payload")
    return np.frombuffer(payload, dtype="<f4").reshape(height, width, 2).astype(np.float32)


def write_flo(flow) -> bytes:
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValueError(f"flow must be H x W x 2, got {flow.shape}")
    height, width = flow.shape[:2]
    return _FLO_MAGIC_BYTES + struct.pack("<ii", width, height) + flow.astype("<f4").tobytes()


def load_flo(path) -> np.ndarray:
    return read_flo(Path(path).read_bytes())


def save_flo(path, flow) -> None:
    Path(path).write_bytes(write_flo(flow))


# images ------------------------------------------------------------------


def _read_pnm(data: bytes) -> np.ndarray:
    stream = io.BytesIO(data)
    magic = stream.read(2)
    channels = {b"P5": 1, b"P6": 3}[magic]
    fields = []
    while len(fields) < 3:
        ch = stream.read(1)
        if not ch:
            raise ImageFormatError("unexpected EOF in PNM header")
        if ch == b"#":
            stream.readline()
            continue
        if ch.isspace():
            continue
        token = ch
        while True:
            ch = stream.read(1)
            if not ch or ch.isspace():
                break
            token += ch
        try:
            fields.append(int(token))
        except ValueError:
            raise ImageFormatError(f"malformed PNM header field {token!r}") from None
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise ImageFormatError(f"invalid PNM size {width}x{height}")
    if maxval != 255:
        raise ImageFormatError(f"unsupported bit depth (maxval {maxval})")
    raw = stream.read(width * height * channels)
    if len(raw) < width * height * channels:
        raise ImageFormatError("unexpected EOF in PNM payload")
    return np.frombuffer(raw, dtype=np.uint8).reshape(height, width, channels)


def decode_image(data: bytes) -> np.ndarray:
    """8-bit grayscale or RGB image bytes (PNG, PGM, PPM) to ``uint8`` ``(H, W, C)``."""
    if data[:2] in (b"P5", b"P6"):
        return _read_pnm(data)
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise ImageFormatError(f"cannot decode image: {exc}") from None
    if img.mode == "L":
        return np.asarray(img, dtype=np.uint8)[..., None]
    if img.mode == "RGB":
        return np.asarray(img, dtype=np.uint8)
    if img.mode in ("I;16", "I;16B", "I;16L", "I", "F"):
        raise ImageFormatError(f"unsupported bit depth (mode {img.mode})")
    raise ImageFormatError(f"unsupported image mode {img.mode}; expected 8-bit grayscale or RGB")


def read_image(data: bytes) -> np.ndarray:
    """Decode to a float32 image, mapping code value ``k`` to ``k / 255``."""
    return decode_image(data).astype(np.float32) / np.float32(255.0)


def to_uint8(img) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[..., None]
    return np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)


def write_image(img, fmt: str = "png") -> bytes:
    """Encode as 8-bit PNG or binary PGM/PPM; ``v`` becomes ``round(255 v)`` clamped."""
    q = to_uint8(img)
    if q.shape[2] not in (1, 3):
        raise ImageFormatError(f"images must have 1 or 3 channels, got {q.shape[2]}")
    fmt = fmt.lower()
    if fmt in ("pgm", "ppm", "pnm"):
        magic = b"P5" if q.shape[2] == 1 else b"P6"
        return magic + f"\n{q.shape[1]} {q.shape[0]}\n255\n".encode() + q.tobytes()
    if fmt == "png":
        buf = io.BytesIO()
        Image.fromarray(q[..., 0] if q.shape[2] == 1 else q).save(buf, format="PNG")
        return buf.getvalue()
    raise ImageFormatError(f"unknown image format {fmt!r}")


def format_for_path(path) -> str:
    suffix = Path(path).suffix.lower().lstrip(".")
    return suffix if suffix in ("pgm", "ppm", "pnm") else "png"


def load_image(path) -> np.ndarray:
    return read_image(Path(path).read_bytes())


def save_image(path, img) -> None:
    Path(path).write_bytes(write_image(img, format_for_path(path)))


# colour coding -------------------------------------------------------------


def make_colorwheel() -> np.ndarray:
    """Middlebury colour wheel, ``(55, 3)`` in ``[0, 255]``."""
    ry, yg, gc, cb, bm, mr = 15, 6, 4, 11, 13, 6
    wheel = np.zeros((ry + yg + gc + cb + bm + mr, 3))
    col = 0
    wheel[col : col + ry, 0] = 255
    wheel[col : col + ry, 1] = np.floor(255 * np.arange(ry) / ry)
    col += ry
    wheel[col : col + yg, 0] = 255 - np.floor(255 * np.arange(yg) / yg)
    wheel[col : col + yg, 1] = 255
    col += yg
    wheel[col : col + gc, 1] = 255
    wheel[col : col + gc, 2] = np.floor(255 * np.arange(gc) / gc)
    col += gc
    wheel[col : col + cb, 1] = 255 - np.floor(255 * np.arange(cb) / cb)
    wheel[col : col + cb, 2] = 255
    col += cb
    wheel[col : col + bm, 2] = 255
    wheel[col : col + bm, 0] = np.floor(255 * np.arange(bm) / bm)
    col += bm
    wheel[col : col + mr, 2] = 255 - np.floor(255 * np.arange(mr) / mr)
    wheel[col : col + mr, 0] = 255
    return wheel


def wheel_position(u, v) -> np.ndarray:
    """Fractional index into the colour wheel for flow direction ``(u, v)``."""
    ncols = make_colorwheel().shape[0]
    angle = np.arctan2(-np.asarray(v, dtype=np.float64), -np.asarray(u, dtype=np.float64)) / np.pi
    return (angle + 1) / 2 * (ncols - 1)


def flow_to_color(flow, max_norm: float | None = None) -> np.ndarray:
    """Colour-code a flow field as an ``(H, W, 3)`` float32 image.

    Hue follows the flow direction, saturation its magnitude divided by
    ``max_norm`` (default: the largest magnitude in the field). Zero flow is
    white. Magnitudes beyond ``max_norm`` are darkened.
    """
    flow = np.asarray(flow, dtype=np.float64)
    u, v = flow[..., 0], flow[..., 1]
    rad = np.sqrt(u**2 + v**2)
    if max_norm is None:
        max_norm = float(rad.max())
    if max_norm <= 0:
        max_norm = 1.0
    rad = rad / max_norm

    wheel = make_colorwheel() / 255.0
    ncols = wheel.shape[0]
    fk = wheel_position(u, v)
    k0 = np.floor(fk).astype(int)
    k1 = (k0 + 1) % ncols
    f = (fk - k0)[..., None]
    col = (1 - f) * wheel[k0] + f * wheel[k1]
    inside = (rad <= 1)[..., None]
    r = rad[..., None]
    col = np.where(inside, 1 - r * (1 - col), col * 0.75)
    return np.clip(col, 0.0, 1.0).astype(np.float32)
