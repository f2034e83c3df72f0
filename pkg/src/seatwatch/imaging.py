"""Image representation and exposure repair.

Camera frames are kept as 8-bit RGB arrays. All brightness correction happens
in HSV space: only the V channel is equalized, so chroma is untouched. The
equalization used is the classic 256-level cdf-min normalization,

    level' = round((cdf(level) - cdf_min) / (N - cdf_min) * 255)

computed in exact integer arithmetic (round half up) so results are identical
across platforms. A single-level image maps to level 0 by convention.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigurationError

__all__ = [
    "RasterImage",
    "HsvImage",
    "LuminanceHistogram",
    "ExposureAssessment",
    "ExposureVerdict",
    "rgb_to_hsv",
    "hsv_to_rgb",
    "v_histogram",
    "equalize_v",
    "assess_exposure",
    "preprocess",
    "load_image",
    "decode_image",
    "save_image",
    "encode_png",
]

DEFAULT_LOW_EXPOSURE = 0.25
DEFAULT_HIGH_EXPOSURE = 0.75


def _round_half_up(x: np.ndarray) -> np.ndarray:
    # np.round is half-to-even; we pin half-up for cross-platform agreement.
    return np.floor(x + 0.5)


@dataclass(frozen=True, eq=False)
class RasterImage:
    """8-bit RGB image, pixels stored row-major as a (height, width, 3) array."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3 or p.dtype != np.uint8:
            raise ValueError(f"expected (h, w, 3) uint8 array, got {p.shape} {p.dtype}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("image must be at least 1x1")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def full(cls, width: int, height: int, rgb: tuple[int, int, int]) -> "RasterImage":
        return cls(np.full((height, width, 3), rgb, dtype=np.uint8))

    def same_shape(self, other: "RasterImage") -> bool:
        return self.pixels.shape == other.pixels.shape


@dataclass(frozen=True, eq=False)
class HsvImage:
    """Hue [0, 360) degrees, saturation and value in [0, 1]; h == 0 where s == 0."""

    pixels: np.ndarray  # (h, w, 3) float64: [..., 0]=h, [..., 1]=s, [..., 2]=v

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3 or p.dtype != np.float64:
            raise ValueError(f"expected (h, w, 3) float64 array, got {p.shape} {p.dtype}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("image must be at least 1x1")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def h(self) -> np.ndarray:
        return self.pixels[..., 0]

    @property
    def s(self) -> np.ndarray:
        return self.pixels[..., 1]

    @property
    def v(self) -> np.ndarray:
        return self.pixels[..., 2]

    def validate(self) -> None:
        """Check channel invariants; conversion outputs satisfy them by construction."""
        h, s, v = self.h, self.s, self.v
        if not ((h >= 0) & (h < 360)).all():
            raise ValueError("hue out of [0, 360)")
        if not ((s >= 0) & (s <= 1)).all():
            raise ValueError("saturation out of [0, 1]")
        if not ((v >= 0) & (v <= 1)).all():
            raise ValueError("value out of [0, 1]")
        if not (h[s == 0] == 0).all():
            raise ValueError("hue must be 0 where saturation is 0")


@dataclass(frozen=True, eq=False)
class LuminanceHistogram:
    """Counts of quantized V levels, level = round(v * 255)."""

    bins: np.ndarray  # (256,) int64

    def __post_init__(self):
        if self.bins.shape != (256,) or not np.issubdtype(self.bins.dtype, np.integer):
            raise ValueError("expected 256 integer bins")

    @property
    def total(self) -> int:
        return int(self.bins.sum())


class ExposureVerdict(str, Enum):
    UNDEREXPOSED = "underexposed"
    NORMAL = "normal"
    OVEREXPOSED = "overexposed"


@dataclass(frozen=True)
class ExposureAssessment:
    mean_v: float
    verdict: ExposureVerdict


def rgb_to_hsv(img: RasterImage) -> HsvImage:
    """Hexcone RGB -> HSV conversion, vectorized over the whole frame."""
    rgb = img.pixels.astype(np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = rgb.max(axis=-1)
    minc = rgb.min(axis=-1)
    delta = maxc - minc

    v = maxc
    s = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1.0), 0.0)

    safe = np.where(delta > 0, delta, 1.0)
    h = np.select(
        [delta == 0, maxc == r, maxc == g],
        [
            np.zeros_like(delta),
            60.0 * (((g - b) / safe) % 6.0),
            60.0 * ((b - r) / safe + 2.0),
        ],
        default=60.0 * ((r - g) / safe + 4.0),
    )
    return HsvImage(np.stack([h, s, v], axis=-1))


def hsv_to_rgb(img: HsvImage) -> RasterImage:
    """Inverse hexcone conversion; channels quantized with round(x * 255)."""
    h, s, v = img.h, img.s, img.v
    hp = h / 60.0
    sector = np.floor(hp).astype(np.int64) % 6
    f = hp - np.floor(hp)

    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))

    r = np.choose(sector, [v, q, p, p, t, v])
    g = np.choose(sector, [t, v, v, q, p, p])
    b = np.choose(sector, [p, p, t, v, v, q])

    rgb = np.stack([r, g, b], axis=-1)
    quant = np.clip(_round_half_up(rgb * 255.0), 0, 255).astype(np.uint8)
    return RasterImage(quant)


def v_levels(img: HsvImage) -> np.ndarray:
    """Quantized V levels, round(v * 255), as an int array."""
    return _round_half_up(img.v * 255.0).astype(np.int64)


def v_histogram(img: HsvImage) -> LuminanceHistogram:
    levels = v_levels(img)
    bins = np.bincount(levels.ravel(), minlength=256).astype(np.int64)
    return LuminanceHistogram(bins)


def _equalization_lut(hist: np.ndarray) -> np.ndarray:
    """256-entry level remap table from a V histogram.

    Integer arithmetic throughout: lut[k] = round_half_up((cdf[k] - cdf_min)
    * 255 / (N - cdf_min)). When the image has a single occupied level
    (N == cdf_min) every level maps to 0.
    """
    cdf = np.cumsum(hist, dtype=np.int64)
    n = int(cdf[-1])
    occupied = np.nonzero(hist)[0]
    cdf_min = int(cdf[occupied[0]])
    if n == cdf_min:
        return np.zeros(256, dtype=np.int64)
    num = (cdf - cdf_min) * 255
    den = n - cdf_min
    lut = (2 * num + den) // (2 * den)  # round half up on non-negative values
    return np.clip(lut, 0, 255)


def equalize_v(img: HsvImage) -> HsvImage:
    """Equalize the V channel on 256 levels; h and s pass through untouched."""
    hist = v_histogram(img)
    lut = _equalization_lut(hist.bins)
    new_v = lut[v_levels(img)] / 255.0
    out = img.pixels.copy()
    out[..., 2] = new_v
    return HsvImage(out)


def assess_exposure(
    img: HsvImage,
    low: float = DEFAULT_LOW_EXPOSURE,
    high: float = DEFAULT_HIGH_EXPOSURE,
) -> ExposureAssessment:
    """Advisory brightness verdict from the mean V value.

    mean_v < low is underexposed, mean_v > high overexposed, else normal.
    Preprocessing equalizes unconditionally; this is metadata for operators.
    """
    if not (0.0 <= low < high <= 1.0):
        raise ConfigurationError(f"need 0 <= low < high <= 1, got low={low} high={high}")
    mean_v = float(img.v.mean())
    if mean_v < low:
        verdict = ExposureVerdict.UNDEREXPOSED
    elif mean_v > high:
        verdict = ExposureVerdict.OVEREXPOSED
    else:
        verdict = ExposureVerdict.NORMAL
    return ExposureAssessment(mean_v=mean_v, verdict=verdict)


def preprocess(img: RasterImage) -> RasterImage:
    """Exposure repair applied before detection: equalize V in HSV space."""
    return hsv_to_rgb(equalize_v(rgb_to_hsv(img)))


# --- PNG/JPEG ingestion and emission ------------------------------------------

def decode_image(data: bytes) -> RasterImage:
    """Decode PNG/JPEG bytes to 8-bit RGB; alpha and palettes are flattened."""
    with Image.open(io.BytesIO(data)) as im:
        rgb = im.convert("RGB")
        return RasterImage(np.asarray(rgb, dtype=np.uint8).copy())


def load_image(path: str | Path) -> RasterImage:
    with open(path, "rb") as f:
        return decode_image(f.read())


def encode_png(img: RasterImage) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(img.pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def save_image(img: RasterImage, path: str | Path) -> None:
    """Write PNG or JPEG depending on the file extension."""
    suffix = Path(path).suffix.lower()
    fmt = {"png": "PNG", "jpg": "JPEG", "jpeg": "JPEG"}.get(suffix.lstrip("."))
    if fmt is None:
        raise ConfigurationError(f"unsupported image extension {suffix!r} (use .png/.jpg)")
    Image.fromarray(img.pixels, mode="RGB").save(path, format=fmt)
