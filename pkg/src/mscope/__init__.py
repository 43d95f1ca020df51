"""Topological complexity measurements of image-patch manifolds.

Build patch point-clouds from images under exact feature-space mappings
(Haar wavelet, sub-pixel shuffling, channel copy, residual construction),
compute distance matrices under L2 or correlation metrics, and measure the
manifold's persistent homology (H0/H1 barcodes, Betti curves).
"""

__version__ = "0.1.0"

from .cloud import (
    DistanceMatrix,
    PatchCloud,
    d2,
    dcorr,
    distance_matrix,
    extract_patches,
    load_dmat,
    save_dmat,
)
from .errors import (
    CapacityError,
    ConfigError,
    DimensionError,
    FormatError,
    MscopeError,
)
from .imgio import (
    NoiseSpec,
    add_gaussian_noise,
    bicubic_resample,
    load_cloud,
    load_image,
    save_cloud,
    save_image,
)
from .persistence import (
    BettiCurve,
    Filtration,
    PersistenceDiagram,
    betti_curve,
    brute_force_diagram,
    censor,
    diagrams_equal,
    h0_barcode,
    reduce_filtration,
    rips_filtration,
)
from .pipeline import (
    ComparisonVerdict,
    ExperimentConfig,
    ReportBundle,
    build_manifold,
    compare_manifolds,
    run_experiment,
    synth_cloud,
    textured_images,
)
from .svgplot import barcode_svg
from .transforms import (
    SubbandSet,
    as_stack,
    copy_ch,
    haar_dwt2,
    haar_idwt2,
    pixel_shuffle_compose,
    pixel_shuffle_decompose,
    residual,
    to_image,
    wavelet_stack,
    wavelet_unstack,
)
