"""Seedable scan-simulation augmentations for training images.

Eight operations, considered in a fixed order and each applied with 50%
probability and a uniformly drawn magnitude: horizontal shift, rotation,
vertical shift, dilation/erosion, edge noise, salt noise, contrast, and
brightness. Images are grayscale in [0, 1]; geometry ops fill revealed
area with white (scans are dark-on-light) and never change dimensions.

Randomness comes from one sub-stream per operation, split off the seed
with ``SeedSequence(seed, spawn_key=(op_index,))`` (PCG64). The first
draw of a sub-stream is the operation's apply/skip coin, magnitudes
follow; disabling one operation therefore never shifts another one's
randomness. Corpus runs derive per-file seeds as
``seed XOR sha256(file stem)[:8]`` so parallel and serial runs agree.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np
from PIL import Image
from scipy import ndimage


@dataclass
class RasterImage:
    """Grayscale raster, intensities in [0, 1], row-major."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must be a non-empty 2-D array")
        self.pixels = np.clip(arr, 0.0, 1.0)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @classmethod
    def from_png(cls, path) -> "RasterImage":
        with Image.open(path) as im:
            gray = im.convert("L")
            return cls(np.asarray(gray, dtype=np.float64) / 255.0)

    def to_png(self, path) -> None:
        data = np.round(self.pixels * 255.0).astype(np.uint8)
        Image.fromarray(data, mode="L").save(path, format="PNG")


@dataclass
class AugmentConfig:
    h_shift: bool = True
    rotation: bool = True
    v_shift: bool = True
    morph: bool = True
    edge_noise: bool = True
    salt: bool = True
    contrast: bool = True
    brightness: bool = True

    h_shift_max: float = 8.0           # pixels
    rot_max_degrees: float = 1.0
    v_shift_max: float = 4.0           # pixels
    morph_semi_x: float = 1.0          # structuring-ellipse semi-axes
    morph_semi_y: float = 0.5
    edge_noise_p_max: float = 0.20
    salt_p_max: float = 0.01
    contrast_log2_min: float = -1.0
    contrast_log2_max: float = 1.0
    brightness_min: float = -0.5
    brightness_max: float = 0.2
    apply_probability: float = 0.5

    _ENABLE_FLAGS = ("h_shift", "rotation", "v_shift", "morph",
                     "edge_noise", "salt", "contrast", "brightness")

    def __post_init__(self):
        if not 0.0 <= self.apply_probability <= 1.0:
            raise ValueError("apply_probability must be within [0, 1]")
        if not 0.0 <= self.edge_noise_p_max <= 0.20:
            raise ValueError("edge_noise_p_max must be within [0, 0.20]")
        if not 0.0 <= self.salt_p_max <= 0.01:
            raise ValueError("salt_p_max must be within [0, 0.01]")

    @classmethod
    def disabled(cls) -> "AugmentConfig":
        return cls(**{name: False for name in cls._ENABLE_FLAGS})


# operation order is normative: a X-th sub-stream always feeds the same op
OP_ORDER = ("h_shift", "rotation", "v_shift", "morph",
            "edge_noise", "salt", "contrast", "brightness")


def _op_rng(seed: int, op_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed & 0xFFFFFFFFFFFFFFFF, spawn_key=(op_index,))
    return np.random.default_rng(ss)


def _clip(arr: np.ndarray) -> np.ndarray:
    return np.clip(arr, 0.0, 1.0)


def shift_horizontal(pixels: np.ndarray, dx: float) -> np.ndarray:
    return _clip(ndimage.shift(pixels, (0.0, dx), order=1,
                               mode="constant", cval=1.0))


def shift_vertical(pixels: np.ndarray, dy: float) -> np.ndarray:
    return _clip(ndimage.shift(pixels, (dy, 0.0), order=1,
                               mode="constant", cval=1.0))


def rotate(pixels: np.ndarray, degrees: float) -> np.ndarray:
    return _clip(ndimage.rotate(pixels, degrees, reshape=False, order=1,
                                mode="constant", cval=1.0))


def morph_footprint(semi_x: float, semi_y: float) -> np.ndarray:
    """Ellipse with the given semi-axes rasterized onto a 3x3 grid."""
    ys, xs = np.mgrid[-1:2, -1:2].astype(np.float64)
    sx = max(semi_x, 1e-9)
    sy = max(semi_y, 1e-9)
    return (xs / sx) ** 2 + (ys / sy) ** 2 <= 1.0 + 1e-9


def morph(pixels: np.ndarray, dilate: bool,
          semi_x: float = 1.0, semi_y: float = 0.5) -> np.ndarray:
    footprint = morph_footprint(semi_x, semi_y)
    op = ndimage.grey_dilation if dilate else ndimage.grey_erosion
    return _clip(op(pixels, footprint=footprint, mode="nearest"))


def edge_eligibility_mask(pixels: np.ndarray) -> np.ndarray:
    """Pixels whose 3x3 neighborhood (binarized at 0.5) is not uniform.

    Border pixels use clamped (edge-replicated) neighborhoods.
    """
    binary = pixels >= 0.5
    all_white = ndimage.minimum_filter(binary, size=3, mode="nearest")
    all_black = ~ndimage.maximum_filter(binary, size=3, mode="nearest")
    return ~(all_white | all_black)


def edge_negate(pixels: np.ndarray, p: float,
                rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Negate edge pixels independently with probability p."""
    if not 0.0 <= p <= 0.20:
        raise ValueError("edge-noise probability must be within [0, 0.20]")
    if p == 0.0:
        return pixels.copy()
    rng = rng if rng is not None else np.random.default_rng()
    mask = edge_eligibility_mask(pixels) & (rng.random(pixels.shape) < p)
    out = pixels.copy()
    out[mask] = 1.0 - out[mask]
    return out


def salt_negate(pixels: np.ndarray, p: float,
                rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Negate every pixel independently with probability p."""
    if p == 0.0:
        return pixels.copy()
    rng = rng if rng is not None else np.random.default_rng()
    mask = rng.random(pixels.shape) < p
    out = pixels.copy()
    out[mask] = 1.0 - out[mask]
    return out


def adjust_contrast(pixels: np.ndarray, log2_factor: float) -> np.ndarray:
    """Scale contrast around mid-gray by 2**log2_factor."""
    return _clip((pixels - 0.5) * (2.0 ** log2_factor) + 0.5)


def adjust_brightness(pixels: np.ndarray, offset: float) -> np.ndarray:
    return _clip(pixels + offset)


def augment(image: RasterImage, cfg: Optional[AugmentConfig] = None,
            seed: int = 0) -> RasterImage:
    """Apply the augmentation pipeline; deterministic given (cfg, seed)."""
    cfg = cfg if cfg is not None else AugmentConfig()
    pixels = image.pixels.copy()
    for op_index, name in enumerate(OP_ORDER):
        if not getattr(cfg, name):
            continue
        rng = _op_rng(seed, op_index)
        if rng.random() >= cfg.apply_probability:
            continue
        if name == "h_shift":
            pixels = shift_horizontal(pixels, rng.uniform(-cfg.h_shift_max,
                                                          cfg.h_shift_max))
        elif name == "rotation":
            pixels = rotate(pixels, rng.uniform(-cfg.rot_max_degrees,
                                                cfg.rot_max_degrees))
        elif name == "v_shift":
            pixels = shift_vertical(pixels, rng.uniform(-cfg.v_shift_max,
                                                        cfg.v_shift_max))
        elif name == "morph":
            pixels = morph(pixels, dilate=bool(rng.integers(2)),
                           semi_x=cfg.morph_semi_x, semi_y=cfg.morph_semi_y)
        elif name == "edge_noise":
            pixels = edge_negate(pixels, rng.uniform(0.0, cfg.edge_noise_p_max), rng)
        elif name == "salt":
            pixels = salt_negate(pixels, rng.uniform(0.0, cfg.salt_p_max), rng)
        elif name == "contrast":
            pixels = adjust_contrast(pixels, rng.uniform(cfg.contrast_log2_min,
                                                         cfg.contrast_log2_max))
        elif name == "brightness":
            pixels = adjust_brightness(pixels, rng.uniform(cfg.brightness_min,
                                                           cfg.brightness_max))
    return RasterImage(pixels)


def derive_file_seed(seed: int, name: str) -> int:
    """Stable per-file seed so corpus order and parallelism do not matter."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()[:8]
    return (seed ^ int.from_bytes(digest, "little")) & 0xFFFFFFFFFFFFFFFF
