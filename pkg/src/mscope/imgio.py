"""Image and point-cloud I/O, noise injection, bicubic resampling.

Conventions
-----------
Images are float64 numpy arrays in nominal range [0, 1], shape (H, W) for
grayscale or (H, W, C) channel-interleaved.  8-bit PNG/PGM are the accepted
input encodings; output is always 8-bit.

Point clouds are serialized in a small binary container:
magic ``PCLD`` (4 bytes), u32 version=1, u64 n, u64 d, then n*d
little-endian float64, point-major.  Header is exactly 24 bytes.

All randomness goes through ``numpy.random.default_rng`` (PCG64); the same
generator family is used across the whole package so manifests reproduce.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

from .cloud import PatchCloud
from .errors import ConfigError, FormatError

_PCLD_MAGIC = b"PCLD"
_PCLD_VERSION = 1
_PCLD_HEADER = struct.Struct("<4sIQQ")


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian noise, std given in 8-bit units (15, 30, 50, ...)."""

    sigma8bit: float
    seed: int

    def __post_init__(self):
        if self.sigma8bit < 0:
            raise ConfigError(f"sigma8bit must be >= 0, got {self.sigma8bit}")


def load_image(path) -> np.ndarray:
    """Read an 8-bit grayscale or RGB image (PNG/PGM) into [0, 1] floats.

    Pixel value v maps to v/255 exactly.  Anything that is not 8-bit
    L/RGB (16-bit PGM, palette, alpha, float TIFF, ...) raises FormatError.
    """
    try:
        with PILImage.open(path) as im:
            im.load()
            if im.mode == "1":
                im = im.convert("L")
            if im.mode not in ("L", "RGB"):
                raise FormatError(
                    f"unsupported image mode {im.mode!r} in {path}; "
                    "expected 8-bit grayscale or RGB"
                )
            arr = np.asarray(im, dtype=np.uint8)
    except FileNotFoundError:
        raise
    except (OSError, UnidentifiedImageError) as exc:
        raise FormatError(f"cannot read image {path}: {exc}") from exc
    return arr.astype(np.float64) / 255.0


def save_image(img: np.ndarray, path) -> None:
    """Write an image as 8-bit, clamping to [0, 1] and rounding half up."""
    arr = np.asarray(img, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains NaN/Inf")
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim == 2:
        mode = "L"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        mode = "RGB"
    else:
        raise FormatError(f"cannot encode shape {arr.shape} as 8-bit PNG")
    quantized = np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    PILImage.fromarray(quantized, mode=mode).save(path)


def add_gaussian_noise(img: np.ndarray, spec: NoiseSpec, clamp: bool = False) -> np.ndarray:
    """Add i.i.d. N(0, (sigma8bit/255)^2) noise, deterministic given the seed.

    No clamping by default: the residual analysis relies on the noise staying
    exactly Gaussian.  Pass clamp=True to clip the result to [0, 1].
    """
    img = np.asarray(img, dtype=np.float64)
    rng = np.random.default_rng(spec.seed)
    out = img + rng.normal(0.0, spec.sigma8bit / 255.0, img.shape)
    if clamp:
        out = np.clip(out, 0.0, 1.0)
    return out


def _keys_kernel(t: np.ndarray) -> np.ndarray:
    """Keys cubic convolution kernel with a = -0.5, support (-2, 2)."""
    t = np.abs(t)
    t2 = t * t
    t3 = t2 * t
    near = 1.5 * t3 - 2.5 * t2 + 1.0
    far = -0.5 * t3 + 2.5 * t2 - 4.0 * t + 2.0
    return np.where(t <= 1.0, near, np.where(t < 2.0, far, 0.0))


def _resample_matrix(n_in: int, scale: float, antialias: bool) -> np.ndarray:
    """Dense (n_out, n_in) row-stochastic weight matrix for one axis.

    Source coordinate of output sample i is (i + 0.5)/scale - 0.5.  When
    downscaling with antialias the kernel is stretched by 1/scale.  Out-of-
    range taps are folded onto the clamped edge sample (replicate boundary)
    and each row is normalized to sum exactly 1.
    """
    n_out = int(np.floor(n_in * scale + 0.5))
    kscale = scale if (antialias and scale < 1.0) else 1.0
    support = 2.0 / kscale
    x = (np.arange(n_out) + 0.5) / scale - 0.5
    left = np.floor(x - support).astype(np.int64) + 1
    n_taps = int(np.ceil(2 * support)) + 1
    taps = left[:, None] + np.arange(n_taps)[None, :]
    weights = _keys_kernel((taps - x[:, None]) * kscale)
    weights /= weights.sum(axis=1, keepdims=True)
    w = np.zeros((n_out, n_in))
    clamped = np.clip(taps, 0, n_in - 1)
    for i in range(n_out):
        np.add.at(w[i], clamped[i], weights[i])
    return w


def bicubic_resample(img: np.ndarray, scale: float, antialias: bool = True) -> np.ndarray:
    """Separable bicubic (Keys a=-0.5) resampling by a positive scale factor.

    Output dims are round(scale * dims).  The operator is linear and maps
    constant images to the same constant (rows of the weight matrix sum
    to one).  Antialias only takes effect when downscaling.
    """
    if scale <= 0:
        raise ConfigError(f"scale must be positive, got {scale}")
    img = np.asarray(img, dtype=np.float64)
    gray = img.ndim == 2
    arr = img[:, :, None] if gray else img
    wr = _resample_matrix(arr.shape[0], scale, antialias)
    wc = _resample_matrix(arr.shape[1], scale, antialias)
    out = np.einsum("ri,ijc,sj->rsc", wr, arr, wc, optimize=True)
    return out[:, :, 0] if gray else out


def save_cloud(cloud: PatchCloud, path) -> None:
    """Serialize a point cloud; round-trip through load_cloud is bit-exact."""
    pts = np.ascontiguousarray(cloud.points, dtype="<f8")
    header = _PCLD_HEADER.pack(_PCLD_MAGIC, _PCLD_VERSION, cloud.n, cloud.d)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(pts.tobytes())


def load_cloud(path) -> PatchCloud:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _PCLD_HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, n, d = _PCLD_HEADER.unpack_from(raw)
    if magic != _PCLD_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != _PCLD_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    expected = _PCLD_HEADER.size + 8 * n * d
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    pts = np.frombuffer(raw, dtype="<f8", offset=_PCLD_HEADER.size).reshape(n, d)
    return PatchCloud(points=pts.astype(np.float64), provenance=f"loaded from {path}")
