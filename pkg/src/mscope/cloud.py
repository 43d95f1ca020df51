"""Patch point-clouds and distance matrices.

The two metrics from the analysis:

* L2    : d2(x, y) = ||x - y||_2, optionally divided by sqrt(d) so that
          filtration axes are comparable across ambient dimensions.
* CORR  : dcorr(x, y) = sqrt(1 - corr(x, y)) with Pearson correlation;
          invariant under positive affine rescaling of either point, which
          is what makes it stable under batch normalization.

``distance_matrix`` must produce results bit-identical to a naive
per-pair loop (and independent of thread count), so both the scalar
functions and the row-vectorized matrix code funnel every pair through
the same elementwise reductions in the same order: plain ``np.sum``
reductions over contiguous rows, never BLAS.

On-disk format: magic ``DMAT``, u32 version=1, u64 n, u8 metric tag
(0=L2, 1=CORR), u8 normalized flag, then the strict upper triangle
row-major as little-endian float64.
"""

from __future__ import annotations

import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, FormatError

_DMAT_MAGIC = b"DMAT"
_DMAT_VERSION = 1
_DMAT_HEADER = struct.Struct("<4sIQBB")
_METRIC_TAGS = {"L2": 0, "CORR": 1}
_TAG_METRICS = {v: k for k, v in _METRIC_TAGS.items()}

# intermediate buffer cap for row-blocked distance computation
_BLOCK_BYTES = 256 * 1024 * 1024


@dataclass(frozen=True)
class PatchCloud:
    """n points in R^d plus a free-text provenance manifest."""

    points: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise DimensionError(f"points must be (n, d), got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("cloud contains NaN/Inf")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric nonnegative matrix with zero diagonal under one metric.

    degenerate_pairs counts off-diagonal pairs involving a zero-variance
    point under CORR (where corr is defined as 0, so the distance is 1).
    """

    values: np.ndarray
    metric: str
    normalized: bool = False
    degenerate_pairs: int = 0

    @property
    def n(self) -> int:
        return self.values.shape[0]


def extract_patches(
    src: np.ndarray,
    patch: int,
    count: int,
    seed: int,
    aligned_subbands: bool = True,
    corners: np.ndarray | None = None,
) -> PatchCloud:
    """Sample square patches at uniform-random top-left corners.

    src is a (C, H, W) stack.  With aligned_subbands each point is the
    channel-major concatenation of the same spatial window across all C
    planes (d = patch**2 * C); without it, each sample also draws a
    channel and the point is that single plane's window (d = patch**2).
    Sampling is with replacement; `corners` (k, 2) overrides the random
    corner draw.
    """
    src = np.asarray(src, dtype=np.float64)
    if src.ndim != 3:
        raise DimensionError(f"expected (C, H, W) stack, got shape {src.shape}")
    nchan, h, w = src.shape
    if patch > h or patch > w:
        raise DimensionError(f"patch {patch} exceeds spatial dims {h}x{w}")
    if count < 0:
        raise ConfigError(f"count must be >= 0, got {count}")

    rng = np.random.default_rng(seed)
    if corners is None:
        rows = rng.integers(0, h - patch + 1, count)
        cols = rng.integers(0, w - patch + 1, count)
    else:
        corners = np.asarray(corners)
        rows, cols = corners[:, 0], corners[:, 1]
        count = len(rows)
    if aligned_subbands:
        d = patch * patch * nchan
        pts = np.empty((count, d))
        for i in range(count):
            pts[i] = src[:, rows[i] : rows[i] + patch, cols[i] : cols[i] + patch].ravel()
    else:
        chans = rng.integers(0, nchan, count)
        pts = np.empty((count, patch * patch))
        for i in range(count):
            pts[i] = src[chans[i], rows[i] : rows[i] + patch, cols[i] : cols[i] + patch].ravel()
    manifest = (
        f"extract_patches(patch={patch}, count={count}, seed={seed}, "
        f"aligned_subbands={aligned_subbands}, src_shape={src.shape})"
    )
    return PatchCloud(points=pts, provenance=manifest)


def d2(x: np.ndarray, y: np.ndarray, normalized: bool = False) -> float:
    """Euclidean distance, optionally divided by sqrt(d)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError(f"dimension mismatch {x.shape} vs {y.shape}")
    diff = x - y
    val = np.sqrt(np.sum(diff * diff))
    if normalized:
        val = val / np.sqrt(x.size)
    return float(val)


def _corr_to_dist(corr):
    """sqrt(1 - corr) with clamping of fp overshoot; ufunc-compatible."""
    corr = np.minimum(1.0, np.maximum(-1.0, corr))
    return np.sqrt(1.0 - corr)


def dcorr(x: np.ndarray, y: np.ndarray) -> float:
    """Correlation distance sqrt(1 - Pearson(x, y)), in [0, sqrt(2)].

    A zero-variance (constant) point has undefined correlation; it is
    treated as corr = 0, hence distance 1, to keep pipelines total on
    flat patches.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError(f"dimension mismatch {x.shape} vs {y.shape}")
    if x.size < 2:
        raise DimensionError("correlation needs d >= 2")
    cx = x - np.mean(x)
    cy = y - np.mean(y)
    sx = np.sqrt(np.sum(cx * cx))
    sy = np.sqrt(np.sum(cy * cy))
    if sx == 0.0 or sy == 0.0:
        return 1.0
    corr = np.sum(cx * cy) / (sx * sy)
    return float(_corr_to_dist(corr))


def _threads() -> int:
    env = os.environ.get("MSCOPE_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def _row_block_l2(pts, i0, i1, out):
    diff = pts[i0:i1, None, :] - pts[None, :, :]
    out[i0:i1] = np.sqrt(np.sum(diff * diff, axis=2))


def _row_block_corr(centered, norms, zero, i0, i1, out):
    num = np.sum(centered[i0:i1, None, :] * centered[None, :, :], axis=2)
    den = norms[i0:i1, None] * norms[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = num / den
    corr[zero[i0:i1], :] = 0.0
    corr[:, zero] = 0.0
    out[i0:i1] = _corr_to_dist(corr)


def distance_matrix(
    cloud: PatchCloud, metric: str = "L2", normalized: bool = False
) -> DistanceMatrix:
    """Full pairwise distance matrix of a cloud.

    Row blocks may be computed on several threads (capped by the
    MSCOPE_THREADS env var); blocks write disjoint slices, so the result
    is independent of thread count and bit-identical to a sequential
    per-pair loop.
    """
    if metric not in _METRIC_TAGS:
        raise ConfigError(f"metric must be one of {sorted(_METRIC_TAGS)}, got {metric!r}")
    if normalized and metric != "L2":
        raise ConfigError("normalized is only valid with the L2 metric")
    pts = cloud.points
    n, d = pts.shape
    out = np.zeros((n, n))
    degenerate = 0
    if n:
        block = max(1, min(n, int(_BLOCK_BYTES // max(1, n * d * 8))))
        starts = range(0, n, block)
        if metric == "L2":
            jobs = [(i0, min(n, i0 + block)) for i0 in starts]
            worker = lambda span: _row_block_l2(pts, span[0], span[1], out)
        else:
            if d < 2:
                raise DimensionError("correlation needs d >= 2")
            centered = pts - np.mean(pts, axis=1, keepdims=True)
            norms = np.sqrt(np.sum(centered * centered, axis=1))
            zero = norms == 0.0
            nz = int(np.count_nonzero(zero))
            degenerate = nz * (n - nz) + nz * (nz - 1) // 2
            jobs = [(i0, min(n, i0 + block)) for i0 in starts]
            worker = lambda span: _row_block_corr(
                centered, norms, zero, span[0], span[1], out
            )
        nthreads = _threads()
        if nthreads > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=nthreads) as pool:
                list(pool.map(worker, jobs))
        else:
            for span in jobs:
                worker(span)
        if metric == "L2" and normalized:
            out /= np.sqrt(d)
        np.fill_diagonal(out, 0.0)
    return DistanceMatrix(
        values=out, metric=metric, normalized=normalized, degenerate_pairs=degenerate
    )


def save_dmat(dm: DistanceMatrix, path) -> None:
    """Serialize the strict upper triangle with metric metadata."""
    n = dm.n
    header = _DMAT_HEADER.pack(
        _DMAT_MAGIC, _DMAT_VERSION, n, _METRIC_TAGS[dm.metric], int(dm.normalized)
    )
    iu = np.triu_indices(n, k=1)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(dm.values[iu], dtype="<f8").tobytes())


def load_dmat(path) -> DistanceMatrix:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _DMAT_HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, n, tag, norm = _DMAT_HEADER.unpack_from(raw)
    if magic != _DMAT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != _DMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if tag not in _TAG_METRICS:
        raise FormatError(f"{path}: unknown metric tag {tag}")
    count = n * (n - 1) // 2
    expected = _DMAT_HEADER.size + 8 * count
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    tri = np.frombuffer(raw, dtype="<f8", offset=_DMAT_HEADER.size)
    values = np.zeros((n, n))
    iu = np.triu_indices(n, k=1)
    values[iu] = tri
    values[(iu[1], iu[0])] = tri
    return DistanceMatrix(
        values=values, metric=_TAG_METRICS[tag], normalized=bool(norm)
    )
