"""Color space conversions between sRGB, linear RGB, CIE XYZ, CIE LAB,
CIE 1964 U*V*W*, and an HSL decomposition.

All converters are pure functions over float64 arrays whose last axis holds
the three channel components. Scalar channel helpers accept plain floats.

References:
    IEC 61966-2-1 for the sRGB transfer function and primaries.
    CIE 15:2004 for LAB; the 1964 U*V*W* space is built on the CIE 1960
    uniform chromaticity scale (u, v) with W* = 25 * Y**(1/3) - 17 for Y
    expressed on a 0..100 scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "ColorSpace",
    "WhitePoint",
    "D65",
    "LINEAR_TO_XYZ",
    "XYZ_TO_LINEAR",
    "srgb_to_linear",
    "linear_to_srgb",
    "linear_to_xyz",
    "xyz_to_linear",
    "xyz_to_lab",
    "lab_to_xyz",
    "xyz_to_uvw",
    "uvw_to_xyz",
    "srgb_to_hsl",
    "hsl_to_srgb",
    "convert_array",
    "convert_triple",
]


class ColorSpace(Enum):
    """Tag identifying the coordinate system of a color triple or buffer."""

    SRGB = "srgb"
    LINEAR_RGB = "linear_rgb"
    XYZ = "xyz"
    LAB = "lab"
    UVW = "uvw"
    HSL = "hsl"


@dataclass(frozen=True)
class WhitePoint:
    """Reference white in XYZ coordinates, normalized so Y is (nearly) 1."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if not (self.x > 0 and self.y > 0 and self.z > 0):
            raise ValueError("white point components must be strictly positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


# Linear RGB -> XYZ for the sRGB primaries (IEC 61966-2-1, D65, 2 degree observer).
LINEAR_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ],
    dtype=np.float64,
)
XYZ_TO_LINEAR = np.linalg.inv(LINEAR_TO_XYZ)

# Using the matrix row sums as the reference white keeps the pipeline exactly
# self-consistent: sRGB (1,1,1) maps to L*=100, a*=b*=0 without rounding slack.
D65 = WhitePoint(*(LINEAR_TO_XYZ @ np.ones(3)))

# sRGB transfer function constants.
_SRGB_LINEAR_CUT = 0.04045
_LINEAR_SRGB_CUT = 0.0031308
_SRGB_SLOPE = 12.92
_SRGB_A = 0.055
_SRGB_GAMMA = 2.4

# LAB piecewise constant.
_LAB_DELTA = 6.0 / 29.0

_RANGE_SLACK = 1e-9


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))
        raise ValueError(f"non-finite value in {what} at index {tuple(bad[0])}")


def srgb_to_linear(v):
    """Decode sRGB channel values in [0, 1] to linear light.

    Accepts a float or an array. Values outside [0, 1] (beyond a tiny
    numerical slack) raise ValueError.
    """
    arr = np.asarray(v, dtype=np.float64)
    _check_finite(arr, "sRGB input")
    if np.any(arr < -_RANGE_SLACK) or np.any(arr > 1 + _RANGE_SLACK):
        raise ValueError("sRGB channel value outside [0, 1]")
    arr = np.clip(arr, 0.0, 1.0)
    out = np.where(
        arr <= _SRGB_LINEAR_CUT,
        arr / _SRGB_SLOPE,
        ((arr + _SRGB_A) / (1 + _SRGB_A)) ** _SRGB_GAMMA,
    )
    return float(out) if np.isscalar(v) else out


def linear_to_srgb(v):
    """Encode linear-light channel values to sRGB.

    Out-of-range input is clamped to [0, 1] first; gamut clamping at output
    boundaries is the documented behavior of every sRGB-bound conversion.
    """
    arr = np.asarray(v, dtype=np.float64)
    _check_finite(arr, "linear RGB input")
    arr = np.clip(arr, 0.0, 1.0)
    out = np.where(
        arr <= _LINEAR_SRGB_CUT,
        arr * _SRGB_SLOPE,
        (1 + _SRGB_A) * arr ** (1.0 / _SRGB_GAMMA) - _SRGB_A,
    )
    return float(out) if np.isscalar(v) else out


def linear_to_xyz(arr: np.ndarray) -> np.ndarray:
    return np.asarray(arr, dtype=np.float64) @ LINEAR_TO_XYZ.T


def xyz_to_linear(arr: np.ndarray) -> np.ndarray:
    return np.asarray(arr, dtype=np.float64) @ XYZ_TO_LINEAR.T


def _lab_f(t: np.ndarray) -> np.ndarray:
    d3 = _LAB_DELTA**3
    return np.where(t > d3, np.cbrt(t), t / (3 * _LAB_DELTA**2) + 4.0 / 29.0)


def _lab_f_inv(ft: np.ndarray) -> np.ndarray:
    return np.where(ft > _LAB_DELTA, ft**3, 3 * _LAB_DELTA**2 * (ft - 4.0 / 29.0))


def xyz_to_lab(arr: np.ndarray, wp: WhitePoint = D65) -> np.ndarray:
    """CIE 1976 L*a*b* relative to the given white point."""
    arr = np.asarray(arr, dtype=np.float64)
    fx = _lab_f(arr[..., 0] / wp.x)
    fy = _lab_f(arr[..., 1] / wp.y)
    fz = _lab_f(arr[..., 2] / wp.z)
    return np.stack([116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)], axis=-1)


def lab_to_xyz(arr: np.ndarray, wp: WhitePoint = D65) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    fy = (arr[..., 0] + 16.0) / 116.0
    fx = fy + arr[..., 1] / 500.0
    fz = fy - arr[..., 2] / 200.0
    return np.stack(
        [wp.x * _lab_f_inv(fx), wp.y * _lab_f_inv(fy), wp.z * _lab_f_inv(fz)],
        axis=-1,
    )


def _ucs_1960(arr: np.ndarray, wp: WhitePoint) -> tuple[np.ndarray, np.ndarray]:
    """CIE 1960 (u, v) chromaticity; zero-energy pixels take the white chromaticity."""
    d0 = wp.x + 15.0 * wp.y + 3.0 * wp.z
    u0, v0 = 4.0 * wp.x / d0, 6.0 * wp.y / d0
    d = arr[..., 0] + 15.0 * arr[..., 1] + 3.0 * arr[..., 2]
    safe = d > 1e-12
    d_safe = np.where(safe, d, 1.0)
    u = np.where(safe, 4.0 * arr[..., 0] / d_safe, u0)
    v = np.where(safe, 6.0 * arr[..., 1] / d_safe, v0)
    return u, v


def xyz_to_uvw(arr: np.ndarray, wp: WhitePoint = D65) -> np.ndarray:
    """CIE 1964 U*V*W* with Y taken on a 0..100 scale.

    The cube-root lightness law W* = 25 * Y**(1/3) - 17 is applied over the
    whole Y range rather than being floored at Y = 1; the floor would map all
    sufficiently dark colors to one W* value and make the transform
    non-invertible, which the round-trip guarantees of this module forbid.
    """
    arr = np.asarray(arr, dtype=np.float64)
    if np.any(arr[..., 1] < -_RANGE_SLACK):
        raise ValueError("negative Y is not representable in U*V*W*")
    y100 = 100.0 * np.clip(arr[..., 1], 0.0, None) / wp.y
    w = 25.0 * np.cbrt(y100) - 17.0
    u, v = _ucs_1960(arr, wp)
    d0 = wp.x + 15.0 * wp.y + 3.0 * wp.z
    u0, v0 = 4.0 * wp.x / d0, 6.0 * wp.y / d0
    return np.stack([13.0 * w * (u - u0), 13.0 * w * (v - v0), w], axis=-1)


def uvw_to_xyz(arr: np.ndarray, wp: WhitePoint = D65) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    us, vs, w = arr[..., 0], arr[..., 1], arr[..., 2]
    d0 = wp.x + 15.0 * wp.y + 3.0 * wp.z
    u0, v0 = 4.0 * wp.x / d0, 6.0 * wp.y / d0
    y = ((w + 17.0) / 25.0) ** 3 * wp.y / 100.0
    # At W* = 0 the chroma terms carry no information; fall back to the
    # white chromaticity, which is exact for the zero-energy case.
    scale = 13.0 * w
    safe = np.abs(scale) > 1e-12
    scale_safe = np.where(safe, scale, 1.0)
    u = np.where(safe, us / scale_safe + u0, u0)
    v = np.where(safe, vs / scale_safe + v0, v0)
    x = 1.5 * u * y / v
    d = 6.0 * y / v
    z = (d - x - 15.0 * y) / 3.0
    return np.stack([x, y, z], axis=-1)


def srgb_to_hsl(arr: np.ndarray) -> np.ndarray:
    """Hexcone HSL: hue in degrees [0, 360), saturation and lightness in [0, 1].

    Achromatic pixels (max == min) report hue 0 and saturation 0; a zero
    saturation is the achromatic flag.
    """
    arr = np.asarray(arr, dtype=np.float64)
    _check_finite(arr, "sRGB input")
    if np.any(arr < -_RANGE_SLACK) or np.any(arr > 1 + _RANGE_SLACK):
        raise ValueError("sRGB channel value outside [0, 1]")
    arr = np.clip(arr, 0.0, 1.0)
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    cmax = arr.max(axis=-1)
    cmin = arr.min(axis=-1)
    delta = cmax - cmin
    lum = (cmax + cmin) / 2.0

    chroma = delta > 0
    delta_safe = np.where(chroma, delta, 1.0)
    hue = np.zeros_like(lum)
    hue = np.where(chroma & (cmax == r), ((g - b) / delta_safe) % 6.0, hue)
    hue = np.where(chroma & (cmax == g) & (cmax != r), (b - r) / delta_safe + 2.0, hue)
    hue = np.where(
        chroma & (cmax == b) & (cmax != r) & (cmax != g),
        (r - g) / delta_safe + 4.0,
        hue,
    )
    hue = (hue * 60.0) % 360.0

    # 1 - |2L - 1| written branch-wise: the naive form cancels near black and
    # white and can push saturation past 1 by ~1e-9.
    denom = np.where(lum <= 0.5, cmax + cmin, 2.0 - cmax - cmin)
    sat = np.where(chroma & (denom > 0), delta / np.where(denom > 0, denom, 1.0), 0.0)
    sat = np.clip(sat, 0.0, 1.0)
    return np.stack([np.where(chroma, hue, 0.0), sat, lum], axis=-1)


def hsl_to_srgb(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    _check_finite(arr, "HSL input")
    h = np.mod(arr[..., 0], 360.0)
    s = np.clip(arr[..., 1], 0.0, 1.0)
    lum = np.clip(arr[..., 2], 0.0, 1.0)
    c = (1.0 - np.abs(2.0 * lum - 1.0)) * s
    hp = h / 60.0
    x = c * (1.0 - np.abs(np.mod(hp, 2.0) - 1.0))
    m = lum - c / 2.0
    sector = np.floor(hp).astype(int) % 6
    shape = np.broadcast_shapes(sector.shape, c.shape)
    r = np.zeros(shape)
    g = np.zeros(shape)
    b = np.zeros(shape)
    for sec, (rr, gg, bb) in enumerate(
        [(0, 1, 2), (1, 0, 2), (2, 0, 1), (2, 1, 0), (1, 2, 0), (0, 2, 1)]
    ):
        # rr/gg/bb pick which of (c, x, 0) lands on each channel in this sector.
        mask = sector == sec
        vals = (c, x, np.zeros(shape))
        r = np.where(mask, vals[rr], r)
        g = np.where(mask, vals[gg], g)
        b = np.where(mask, vals[bb], b)
    return np.stack([r + m, g + m, b + m], axis=-1)


# Conversion routing: a tree rooted at XYZ. Each space knows its parent and
# the function pair (toward parent, from parent).
_PARENT = {
    ColorSpace.HSL: ColorSpace.SRGB,
    ColorSpace.SRGB: ColorSpace.LINEAR_RGB,
    ColorSpace.LINEAR_RGB: ColorSpace.XYZ,
    ColorSpace.LAB: ColorSpace.XYZ,
    ColorSpace.UVW: ColorSpace.XYZ,
    ColorSpace.XYZ: None,
}

_UP = {
    ColorSpace.HSL: lambda a, wp: hsl_to_srgb(a),
    ColorSpace.SRGB: lambda a, wp: srgb_to_linear(a),
    ColorSpace.LINEAR_RGB: lambda a, wp: linear_to_xyz(a),
    ColorSpace.LAB: lambda a, wp: lab_to_xyz(a, wp),
    ColorSpace.UVW: lambda a, wp: uvw_to_xyz(a, wp),
}

_DOWN = {
    ColorSpace.HSL: lambda a, wp: srgb_to_hsl(a),
    ColorSpace.SRGB: lambda a, wp: linear_to_srgb(a),
    ColorSpace.LINEAR_RGB: lambda a, wp: xyz_to_linear(a),
    ColorSpace.LAB: lambda a, wp: xyz_to_lab(a, wp),
    ColorSpace.UVW: lambda a, wp: xyz_to_uvw(a, wp),
}


def _chain_to_root(space: ColorSpace) -> list[ColorSpace]:
    chain = [space]
    while _PARENT[chain[-1]] is not None:
        chain.append(_PARENT[chain[-1]])
    return chain


def convert_array(
    arr: np.ndarray,
    frm: ColorSpace,
    to: ColorSpace,
    wp: WhitePoint = D65,
) -> np.ndarray:
    """Convert an array of triples between any two supported spaces.

    The conversion walks the shortest path through the space tree
    (HSL - sRGB - linear RGB - XYZ - {LAB, UVW}), so e.g. sRGB to linear
    never detours through the XYZ matrix.
    """
    arr = np.asarray(arr, dtype=np.float64)
    if arr.shape[-1] != 3:
        raise ValueError("expected triples on the last axis")
    _check_finite(arr, f"{frm.value} input")
    if frm == to:
        return arr.copy()
    src_chain = _chain_to_root(frm)
    dst_chain = _chain_to_root(to)
    common = next(s for s in src_chain if s in dst_chain)
    out = arr
    for space in src_chain[: src_chain.index(common)]:
        out = _UP[space](out, wp)
    for space in reversed(dst_chain[: dst_chain.index(common)]):
        out = _DOWN[space](out, wp)
    return out


def convert_triple(
    triple,
    frm: ColorSpace,
    to: ColorSpace,
    wp: WhitePoint = D65,
) -> np.ndarray:
    """Convert a single color triple; returns a (3,) float64 array."""
    arr = np.asarray(triple, dtype=np.float64)
    if arr.shape != (3,):
        raise ValueError("expected a single triple of three components")
    return convert_array(arr, frm, to, wp)
