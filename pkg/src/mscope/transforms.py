"""Exact, invertible feature-space mappings on images and channel stacks.

Two array layouts appear throughout:

* image:  (H, W) or (H, W, C), channel-interleaved
* stack:  (C, H, W), channel-major planes

The Haar transform uses the orthonormal (unit-gain) convention, so it is a
linear isometry of the flattened pixel vector: for a 2x2 block
[[a, b], [c, d]] the subband samples are

    LL = (a+b+c+d)/2   HL = (a-b+c-d)/2
    LH = (a+b-c-d)/2   HH = (a-b-c+d)/2

Sub-pixel shuffling is a pure permutation of pixel entries: plane
k = dy*scale + dx holds the pixels at offsets (dy, dx) of each scale x scale
cell, channels grouped first (plane index c*scale**2 + k).
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import DimensionError


class SubbandSet(NamedTuple):
    """One-level wavelet decomposition; four planes of half height/width."""

    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray


def as_stack(img: np.ndarray) -> np.ndarray:
    """View an image as a (C, H, W) stack."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return img[None, :, :]
    if img.ndim == 3:
        return np.ascontiguousarray(np.moveaxis(img, 2, 0))
    raise DimensionError(f"expected 2-D or 3-D image, got shape {img.shape}")


def to_image(stack: np.ndarray) -> np.ndarray:
    """Inverse of as_stack for 1- or 3-plane stacks."""
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim != 3:
        raise DimensionError(f"expected (C, H, W) stack, got shape {stack.shape}")
    if stack.shape[0] == 1:
        return stack[0]
    return np.ascontiguousarray(np.moveaxis(stack, 0, 2))


def haar_dwt2(img: np.ndarray) -> SubbandSet:
    """One-level orthonormal Haar decomposition.

    Requires even height and width; odd dims raise rather than pad, since
    implicit padding would silently change patch statistics.
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]
    if h % 2 or w % 2:
        raise DimensionError(f"Haar transform needs even dims, got {h}x{w}")
    a = img[0::2, 0::2]
    b = img[0::2, 1::2]
    c = img[1::2, 0::2]
    d = img[1::2, 1::2]
    return SubbandSet(
        ll=(a + b + c + d) / 2.0,
        lh=(a + b - c - d) / 2.0,
        hl=(a - b + c - d) / 2.0,
        hh=(a - b - c + d) / 2.0,
    )


def haar_idwt2(sb: SubbandSet) -> np.ndarray:
    """Exact inverse of haar_dwt2 (bit-exact on dyadic rationals)."""
    ll, lh, hl, hh = (np.asarray(p, dtype=np.float64) for p in sb)
    if not (ll.shape == lh.shape == hl.shape == hh.shape):
        raise DimensionError("subband planes must share one shape")
    h, w = ll.shape[:2]
    out = np.empty((2 * h, 2 * w) + ll.shape[2:], dtype=np.float64)
    out[0::2, 0::2] = (ll + lh + hl + hh) / 2.0
    out[0::2, 1::2] = (ll + lh - hl - hh) / 2.0
    out[1::2, 0::2] = (ll - lh + hl - hh) / 2.0
    out[1::2, 1::2] = (ll - lh - hl + hh) / 2.0
    return out


def wavelet_stack(img: np.ndarray) -> np.ndarray:
    """Haar-transform an image into a (4*C, H/2, W/2) stack.

    Plane order per channel is LL, LH, HL, HH.
    """
    stack = as_stack(img)
    planes = []
    for chan in stack:
        sb = haar_dwt2(chan)
        planes.extend([sb.ll, sb.lh, sb.hl, sb.hh])
    return np.stack(planes)


def wavelet_unstack(stack: np.ndarray) -> np.ndarray:
    """Invert wavelet_stack back to an image."""
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim != 3 or stack.shape[0] % 4:
        raise DimensionError(f"expected 4*C planes, got shape {stack.shape}")
    chans = [
        haar_idwt2(SubbandSet(*stack[4 * c : 4 * c + 4]))
        for c in range(stack.shape[0] // 4)
    ]
    return to_image(np.stack(chans))


def pixel_shuffle_decompose(img: np.ndarray, scale: int) -> np.ndarray:
    """Rearrange an image into scale**2 * C planes of size (H/s, W/s).

    A pure permutation of entries; plane c*scale**2 + dy*scale + dx holds
    channel c's pixels at cell offset (dy, dx).
    """
    stack = as_stack(img)
    c, h, w = stack.shape
    if h % scale or w % scale:
        raise DimensionError(f"dims {h}x{w} not divisible by scale {scale}")
    hs, ws = h // scale, w // scale
    tiled = stack.reshape(c, hs, scale, ws, scale)
    return np.ascontiguousarray(tiled.transpose(0, 2, 4, 1, 3)).reshape(
        c * scale * scale, hs, ws
    )


def pixel_shuffle_compose(stack: np.ndarray, scale: int) -> np.ndarray:
    """Exact inverse of pixel_shuffle_decompose; returns an image."""
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim != 3:
        raise DimensionError(f"expected (C, H, W) stack, got shape {stack.shape}")
    cs, hs, ws = stack.shape
    if cs % (scale * scale):
        raise DimensionError(f"{cs} planes not divisible by scale**2 = {scale * scale}")
    c = cs // (scale * scale)
    tiled = stack.reshape(c, scale, scale, hs, ws)
    merged = np.ascontiguousarray(tiled.transpose(0, 3, 1, 4, 2)).reshape(
        c, hs * scale, ws * scale
    )
    return to_image(merged)


def copy_ch(img: np.ndarray, scale: int) -> np.ndarray:
    """Stack scale**2 identical copies of each channel.

    Matches the channel count of pixel_shuffle_decompose(HR, scale) when
    HR has scale x the spatial dims, so their difference is well-defined.
    """
    if scale < 1:
        raise DimensionError(f"scale must be >= 1, got {scale}")
    return np.repeat(as_stack(img), scale * scale, axis=0)


def residual(input_t: np.ndarray, mapped_label: np.ndarray) -> np.ndarray:
    """Elementwise input minus mapped label; the learning target."""
    a = np.asarray(input_t, dtype=np.float64)
    b = np.asarray(mapped_label, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return a - b
