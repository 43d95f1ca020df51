"""Experiment orchestration: manifold construction, reports, comparisons.

A run is specified by (task, domain, target):

* task    : denoise | sr_bicubic | sr_unknown
* domain  : image | wavelet | pixelshuffle
* target  : input_manifold | label_original | label_residual

and the transform chain follows the restoration setup, e.g. the denoising
wavelet residual is WT(clean + noise) - WT(clean), the bicubic
super-resolution input is WT(BU(downsample(HR))), and the unknown-decimation
residual is COPY_ch(LR) - PS(HR).

Patch corners are drawn on a coarse grid (units of 2 pixels for the
wavelet pairing, `scale` pixels for the sub-pixel pairing), so two runs
with the same seed sample the *same* spatial windows in the image domain
and in the transformed domain.  That is what makes the isometry and
permutation invariants directly testable end to end.

Metric defaults: the input manifold uses the correlation distance (what
batch normalization preserves), label manifolds use L2.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cloud import PatchCloud, distance_matrix
from .errors import ConfigError, DimensionError
from .imgio import NoiseSpec, add_gaussian_noise, bicubic_resample
from .persistence import (
    BettiCurve,
    PersistenceDiagram,
    betti_curve,
    censor,
    h0_barcode,
    reduce_filtration,
    rips_filtration,
)
from .svgplot import barcode_svg
from .transforms import (
    as_stack,
    copy_ch,
    pixel_shuffle_compose,
    pixel_shuffle_decompose,
    residual,
    wavelet_stack,
)

TASKS = ("denoise", "sr_bicubic", "sr_unknown")
DOMAINS = ("image", "wavelet", "pixelshuffle")
TARGETS = ("input_manifold", "label_original", "label_residual")

# H1 needs the Rips triangle set; beyond this cloud size a run with eps_max
# reports censored H0 only (the realistic 4500-patch studies are H0-only)
H1_MAX_POINTS = 400


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    domain: str
    target: str
    patch: int
    count: int
    sigma8bit: float | None = None
    scale: int | None = None
    seed: int = 0
    metric: str | None = None  # None -> CORR for inputs, L2 for labels
    normalized: bool = False
    eps_max: float | None = None  # None -> H0 only, uncapped
    grid_points: int = 256

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.domain not in DOMAINS:
            raise ConfigError(f"domain must be one of {DOMAINS}, got {self.domain!r}")
        if self.target not in TARGETS:
            raise ConfigError(f"target must be one of {TARGETS}, got {self.target!r}")
        if self.patch < 1:
            raise ConfigError(f"patch must be >= 1, got {self.patch}")
        if self.count < 0:
            raise ConfigError(f"count must be >= 0, got {self.count}")
        if self.task == "denoise" and self.sigma8bit is None:
            raise ConfigError("denoise task needs sigma8bit")
        if self.task in ("sr_bicubic", "sr_unknown"):
            if self.scale is None or self.scale < 2:
                raise ConfigError(f"{self.task} needs an integer scale >= 2")
        if self.grid_points < 2:
            raise ConfigError(f"grid_points must be >= 2, got {self.grid_points}")
        if self.eps_max is not None and self.eps_max <= 0:
            raise ConfigError(f"eps_max must be positive, got {self.eps_max}")

    @property
    def resolved_metric(self) -> str:
        if self.metric is not None:
            return self.metric
        return "CORR" if self.target == "input_manifold" else "L2"

    @property
    def ps_scale(self) -> int:
        """Sub-pixel factor: the task scale, or 2 for denoising."""
        return self.scale if self.scale is not None else 2

    @property
    def coarse_factor(self) -> int:
        """Corner-grid unit (in image pixels) for cross-domain alignment."""
        if self.domain == "wavelet":
            return 2
        if self.domain == "pixelshuffle":
            return self.ps_scale
        return self.scale if self.task == "sr_unknown" else 2


@dataclass(frozen=True)
class ComparisonVerdict:
    verdict: str  # SIMPLER_A | SIMPLER_B | MIXED
    auc_beta0: tuple
    merge_eps_half: tuple

    def simpler(self) -> str | None:
        if self.verdict == "SIMPLER_A":
            return "a"
        if self.verdict == "SIMPLER_B":
            return "b"
        return None


@dataclass(frozen=True)
class ReportBundle:
    config: dict
    barcode_csv: str
    betti_csv: str
    svg: str
    summary: dict
    manifest: dict


def _noise_seed(seed: int, image_index: int) -> int:
    """Stable per-image noise stream derived from the experiment seed."""
    ss = np.random.SeedSequence((seed, 101, image_index))
    return int(ss.generate_state(1)[0])


def _nn_upsample(lr: np.ndarray, scale: int) -> np.ndarray:
    """Image-domain face of COPY_ch: replicate each LR pixel scale x scale."""
    return pixel_shuffle_compose(copy_ch(lr, scale), scale)


def _chain_stack(cfg: ExperimentConfig, img: np.ndarray, image_index: int) -> np.ndarray:
    """Build the (C, H, W) stack this config's chain produces for one image."""
    clean = np.asarray(img, dtype=np.float64)
    s = cfg.ps_scale

    if cfg.task == "denoise":
        spec = NoiseSpec(cfg.sigma8bit, _noise_seed(cfg.seed, image_index))
        degraded = add_gaussian_noise(clean, spec)
        reference = clean
    elif cfg.task == "sr_bicubic":
        lr = bicubic_resample(clean, 1.0 / s, antialias=True)
        degraded = bicubic_resample(lr, float(s), antialias=False)
        reference = clean
    else:  # sr_unknown
        lr = bicubic_resample(clean, 1.0 / s, antialias=True)
        if cfg.domain == "pixelshuffle":
            if cfg.target == "input_manifold":
                return copy_ch(lr, s)
            if cfg.target == "label_original":
                return pixel_shuffle_decompose(clean, s)
            return residual(copy_ch(lr, s), pixel_shuffle_decompose(clean, s))
        degraded = _nn_upsample(lr, s)
        reference = clean

    if cfg.target == "input_manifold":
        base = degraded
    elif cfg.target == "label_original":
        base = reference
    else:
        base = degraded - reference

    if cfg.domain == "image":
        return as_stack(base)
    if cfg.domain == "wavelet":
        return wavelet_stack(base)
    return pixel_shuffle_decompose(base, s)


def build_manifold(cfg: ExperimentConfig, images: list) -> PatchCloud:
    """Assemble the patch cloud for a configuration over an image list.

    Corners are drawn uniformly (with replacement) on the coarse grid, so
    the same seed produces spatially matched windows across domains.  In
    the image domain the patch size must be divisible by the coarse factor.
    """
    if not images:
        raise ConfigError("empty image list")
    f = cfg.coarse_factor
    q = cfg.patch
    if cfg.domain == "image":
        if q % f:
            raise ConfigError(
                f"image-domain patch {q} must be divisible by the coarse "
                f"factor {f} (transformed-domain pairing)"
            )
        q_coarse = q // f
    else:
        q_coarse = q

    stacks = [_chain_stack(cfg, np.asarray(im, dtype=np.float64), i) for i, im in enumerate(images)]
    chans = stacks[0].shape[0]
    his = []
    wis = []
    for st in stacks:
        if st.shape[0] != chans:
            raise DimensionError("images produced stacks with differing channel counts")
        hc = st.shape[1] if cfg.domain != "image" else st.shape[1] // f
        wc = st.shape[2] if cfg.domain != "image" else st.shape[2] // f
        hi = hc - q_coarse + 1
        wi = wc - q_coarse + 1
        if hi < 1 or wi < 1:
            raise DimensionError(
                f"patch {q} too large for stack dims {st.shape[1]}x{st.shape[2]}"
            )
        his.append(hi)
        wis.append(wi)
    his = np.asarray(his)
    wis = np.asarray(wis)

    rng = np.random.default_rng(cfg.seed)
    idx = rng.integers(0, len(stacks), cfg.count)
    rows = rng.integers(0, his[idx])
    cols = rng.integers(0, wis[idx])
    step = f if cfg.domain == "image" else 1

    d = q * q * chans
    pts = np.empty((cfg.count, d))
    for k in range(cfg.count):
        st = stacks[idx[k]]
        r = int(rows[k]) * step
        c = int(cols[k]) * step
        pts[k] = st[:, r : r + q, c : c + q].ravel()

    manifest = json.dumps(
        {
            "task": cfg.task,
            "domain": cfg.domain,
            "target": cfg.target,
            "patch": cfg.patch,
            "count": cfg.count,
            "sigma8bit": cfg.sigma8bit,
            "scale": cfg.scale,
            "seed": cfg.seed,
            "images": len(images),
        },
        sort_keys=True,
    )
    return PatchCloud(points=pts, provenance=manifest)


def synth_cloud(shape: str, n: int, noise: float, seed: int) -> PatchCloud:
    """Seeded samples on a reference manifold.

    circle    : unit circle in R^2 plus isotropic Gaussian jitter
    sphere    : unit sphere in R^3 plus jitter
    blob      : single isotropic Gaussian in R^3, sigma = noise
    two_blobs : two such blobs centered at (+-2, 0, 0)
    """
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    if shape == "circle":
        theta = rng.uniform(0.0, 2.0 * np.pi, n)
        pts = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        pts = pts + rng.normal(0.0, noise, (n, 2)) if noise else pts
    elif shape == "sphere":
        v = rng.normal(0.0, 1.0, (n, 3))
        pts = v / np.sqrt(np.sum(v * v, axis=1, keepdims=True))
        pts = pts + rng.normal(0.0, noise, (n, 3)) if noise else pts
    elif shape == "blob":
        pts = rng.normal(0.0, 1.0, (n, 3)) * noise
    elif shape == "two_blobs":
        half = n // 2
        pts = rng.normal(0.0, 1.0, (n, 3)) * noise
        pts[:half, 0] -= 2.0
        pts[half:, 0] += 2.0
    else:
        raise ConfigError(f"unknown shape {shape!r}")
    manifest = json.dumps(
        {"shape": shape, "n": n, "noise": noise, "seed": seed}, sort_keys=True
    )
    return PatchCloud(points=pts, provenance=manifest)


def textured_images(count: int, size: int, seed: int, levels: int = 256) -> list:
    """Deterministic synthetic textured grayscale images.

    Mixtures of oriented sinusoid products, a smooth gradient, and sharp
    rectangles, normalized to [0, 1] and quantized to k/levels.  With the
    default power-of-two levels the pixel values are dyadic rationals, so
    permutation-invariance checks hold bitwise in float arithmetic.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / size
    images = []
    for _ in range(count):
        img = rng.uniform(-0.5, 0.5) * xx + rng.uniform(-0.5, 0.5) * yy
        for _ in range(rng.integers(2, 5)):
            fx, fy = rng.uniform(1.0, 9.0, 2)
            px, py = rng.uniform(0.0, 2.0 * np.pi, 2)
            amp = rng.uniform(0.3, 1.0)
            img = img + amp * np.sin(2 * np.pi * fx * xx + px) * np.sin(
                2 * np.pi * fy * yy + py
            )
        for _ in range(rng.integers(1, 4)):
            r0, c0 = rng.integers(0, size - size // 4, 2)
            h, w = rng.integers(size // 8, size // 3, 2)
            img[r0 : r0 + h, c0 : c0 + w] += rng.uniform(-1.0, 1.0)
        lo, hi = img.min(), img.max()
        img = (img - lo) / (hi - lo) if hi > lo else np.zeros_like(img)
        img = np.floor(img * (levels - 1) + 0.5) / levels
        images.append(img)
    return images


def _fmt17(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.17g}"


def write_barcode_csv(diag: PersistenceDiagram, path) -> None:
    lines = ["dim,birth,death"]
    for dim, birth, death in zip(diag.dims, diag.births, diag.deaths):
        lines.append(f"{int(dim)},{_fmt17(birth)},{_fmt17(death)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_barcode_csv(path) -> PersistenceDiagram:
    text = Path(path).read_text().strip().splitlines()
    if not text or text[0] != "dim,birth,death":
        raise ConfigError(f"{path} is not a barcode CSV")
    dims, births, deaths = [], [], []
    for line in text[1:]:
        d, b, x = line.split(",")
        dims.append(int(d))
        births.append(float(b))
        deaths.append(math.inf if x == "inf" else float(x))
    dims = np.asarray(dims, dtype=np.int8)
    n_points = int(np.count_nonzero(dims == 0))
    return PersistenceDiagram(
        dims=dims,
        births=np.asarray(births),
        deaths=np.asarray(deaths),
        eps_max=math.inf,
        n_points=n_points,
    )


def write_betti_csv(curve: BettiCurve, path) -> None:
    lines = ["epsilon,beta0,beta1"]
    for eps, b0, b1 in zip(curve.grid, curve.beta0, curve.beta1):
        lines.append(f"{_fmt17(eps)},{int(b0)},{int(b1)}")
    Path(path).write_text("\n".join(lines) + "\n")


def _summary_stats(h0: PersistenceDiagram, cap: float) -> dict:
    """AUC of the normalized beta0 curve and merge quantiles, from the
    uncapped H0 barcode.

    merge_eps(q) is the first eps with beta0 <= max(q*n, 1); since beta0
    never drops below 1, the floor keeps the quantiles defined (and equal
    to full_merge_eps) for tiny clouds.
    """
    n = h0.n_points
    deaths = np.sort(h0.deaths[h0.dims == 0])
    finite = deaths[np.isfinite(deaths)]
    auc = float(np.sum(np.minimum(deaths, cap)) / max(n, 1))

    def merge_eps(q: float) -> float:
        threshold = max(q * n, 1.0)
        need = int(np.ceil(n - threshold - 1e-9))
        if need <= 0:
            return 0.0
        return float(finite[need - 1])

    full = float(finite[-1]) if finite.size else 0.0
    return {
        "auc_beta0": auc,
        "merge_eps": {"0.5": merge_eps(0.5), "0.1": merge_eps(0.1)},
        "full_merge_eps": full,
    }


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_experiment(cfg: ExperimentConfig, images: list, outdir) -> ReportBundle:
    """Execute one configuration end to end and write all artifacts.

    Writes barcode.csv, betti.csv, barcode.svg and summary.json into
    outdir.  Deterministic: identical (config, images) produce identical
    bytes.  eps_max fixes the reporting cap (bars alive there are censored
    to +inf); H1 is computed via the Rips filtration only when eps_max is
    set and the cloud has at most H1_MAX_POINTS points.  Without eps_max
    the run is H0-only and the cap is the full-merge scale.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cloud = build_manifold(cfg, images)
    metric = cfg.resolved_metric
    dm = distance_matrix(cloud, metric, cfg.normalized)
    h0 = h0_barcode(dm)
    if cfg.eps_max is not None:
        cap = cfg.eps_max
        if cloud.n <= H1_MAX_POINTS:
            diag = reduce_filtration(rips_filtration(dm, cap))
        else:
            diag = censor(h0, cap)
    else:
        diag = h0
        finite = h0.deaths[np.isfinite(h0.deaths)]
        cap = float(finite.max()) if finite.size else 1.0
        if cap <= 0:
            cap = 1.0

    grid = np.linspace(0.0, cap, cfg.grid_points)
    curve = betti_curve(diag, grid)

    barcode_path = outdir / "barcode.csv"
    betti_path = outdir / "betti.csv"
    svg_path = outdir / "barcode.svg"
    summary_path = outdir / "summary.json"
    write_barcode_csv(diag, barcode_path)
    write_betti_csv(curve, betti_path)
    svg_path.write_text(barcode_svg(diag, cap))

    config_echo = asdict(cfg)
    stats = _summary_stats(h0, cap)
    summary = {
        "config": config_echo,
        "metric": metric,
        "normalized": cfg.normalized,
        "grid": {"points": cfg.grid_points, "cap": cap},
        "n_points": cloud.n,
        "dim": cloud.d,
        **stats,
    }
    manifest = {
        "version": __version__,
        "seed": cfg.seed,
        "provenance": cloud.provenance,
        "degenerate_pairs": dm.degenerate_pairs,
        "zero_bars": list(diag.zero_bars),
        "hashes": {
            "barcode.csv": _sha256(barcode_path),
            "betti.csv": _sha256(betti_path),
            "barcode.svg": _sha256(svg_path),
        },
    }
    payload = {"summary": summary, "manifest": manifest}
    summary_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return ReportBundle(
        config=config_echo,
        barcode_csv=str(barcode_path),
        betti_csv=str(betti_path),
        svg=str(svg_path),
        summary=summary,
        manifest=manifest,
    )


def load_bundle(summary_json) -> ReportBundle:
    payload = json.loads(Path(summary_json).read_text())
    summary = payload["summary"]
    base = Path(summary_json).parent
    return ReportBundle(
        config=summary["config"],
        barcode_csv=str(base / "barcode.csv"),
        betti_csv=str(base / "betti.csv"),
        svg=str(base / "barcode.svg"),
        summary=summary,
        manifest=payload["manifest"],
    )


def compare_manifolds(a: ReportBundle, b: ReportBundle) -> ComparisonVerdict:
    """SIMPLER verdict when both the beta0 AUC and the 50% merge scale are
    strictly smaller; MIXED otherwise (both scalars are always reported)."""
    for key in ("metric", "normalized"):
        if a.summary[key] != b.summary[key]:
            raise ConfigError(f"bundles disagree on {key}: "
                              f"{a.summary[key]!r} vs {b.summary[key]!r}")
    if a.summary["grid"] != b.summary["grid"]:
        raise ConfigError(
            f"bundles disagree on grid: {a.summary['grid']} vs {b.summary['grid']}"
        )
    auc_a, auc_b = a.summary["auc_beta0"], b.summary["auc_beta0"]
    m_a, m_b = a.summary["merge_eps"]["0.5"], b.summary["merge_eps"]["0.5"]
    if auc_a < auc_b and m_a < m_b:
        verdict = "SIMPLER_A"
    elif auc_b < auc_a and m_b < m_a:
        verdict = "SIMPLER_B"
    else:
        verdict = "MIXED"
    return ComparisonVerdict(
        verdict=verdict, auc_beta0=(auc_a, auc_b), merge_eps_half=(m_a, m_b)
    )
