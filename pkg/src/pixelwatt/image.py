"""Image buffers and PNG I/O.

An ImageBuffer is an immutable (H, W, 3) float64 pixel array tagged with the
color space its values live in. Every operation in this package returns new
buffers; pixel arrays are marked read-only on construction.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .colorspace import D65, ColorSpace, WhitePoint, convert_array
from .errors import DataError

__all__ = ["ImageBuffer", "convert_image", "load_png", "save_png", "png_bytes"]


@dataclass(frozen=True)
class ImageBuffer:
    """Pixel data plus the single color-space tag its values are expressed in."""

    pixels: np.ndarray
    space: ColorSpace

    def __post_init__(self) -> None:
        arr = np.asarray(self.pixels, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError("pixels must have shape (height, width, 3)")
        if arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValueError("image must contain at least one pixel")
        if not np.all(np.isfinite(arr)):
            raise ValueError("pixels must be finite")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def n_pixels(self) -> int:
        return self.height * self.width

    def flat(self) -> np.ndarray:
        """Pixels as an (N, 3) view."""
        return self.pixels.reshape(-1, 3)

    @staticmethod
    def solid(width: int, height: int, triple, space: ColorSpace) -> "ImageBuffer":
        if width < 1 or height < 1:
            raise ValueError("image dimensions must be positive")
        arr = np.broadcast_to(
            np.asarray(triple, dtype=np.float64), (height, width, 3)
        )
        return ImageBuffer(arr, space)

    @staticmethod
    def white(width: int, height: int) -> "ImageBuffer":
        return ImageBuffer.solid(width, height, (1.0, 1.0, 1.0), ColorSpace.SRGB)

    @staticmethod
    def black(width: int, height: int) -> "ImageBuffer":
        return ImageBuffer.solid(width, height, (0.0, 0.0, 0.0), ColorSpace.SRGB)


def convert_image(
    img: ImageBuffer, to: ColorSpace, wp: WhitePoint = D65
) -> ImageBuffer:
    """Convert every pixel of a buffer to another space.

    Identity requests return a buffer with bitwise-equal pixel data.
    """
    if img.space == to:
        return img
    return ImageBuffer(convert_array(img.pixels, img.space, to, wp), to)


def load_png(path) -> ImageBuffer:
    """Load an 8-bit RGB PNG as an sRGB buffer with channels in [0, 1].

    Grayscale and palette images without transparency are promoted to RGB.
    Any alpha channel is rejected: compositing policy is the caller's job.
    """
    path = Path(path)
    try:
        im = Image.open(path)
        im.load()
    except FileNotFoundError:
        raise
    except Exception as exc:  # pillow raises a zoo of types for bad files
        raise DataError(f"cannot read PNG {path}: {exc}") from exc
    if im.mode in ("RGBA", "LA", "PA") or (
        im.mode == "P" and "transparency" in im.info
    ):
        raise DataError(f"{path}: alpha channel is not supported, flatten it first")
    if im.mode not in ("RGB", "L", "P", "1"):
        raise DataError(f"{path}: unsupported PNG mode {im.mode}, expected 8-bit RGB")
    if im.mode != "RGB":
        im = im.convert("RGB")
    arr = np.asarray(im, dtype=np.float64) / 255.0
    return ImageBuffer(arr, ColorSpace.SRGB)


def png_bytes(img: ImageBuffer) -> bytes:
    """Encode an sRGB buffer as 8-bit RGB PNG bytes (deterministic)."""
    if img.space != ColorSpace.SRGB:
        raise ValueError("only sRGB buffers can be encoded as PNG")
    quantized = np.clip(np.round(img.pixels * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(quantized, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def save_png(img: ImageBuffer, path) -> None:
    """Write an sRGB buffer as an 8-bit RGB PNG."""
    Path(path).write_bytes(png_bytes(img))
