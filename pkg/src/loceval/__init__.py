"""Evaluation toolkit and benchmark harness for weakly-supervised object
localization: threshold-independent box and pixel metrics over per-image
score maps, plus a random-search protocol around external trainers."""

__version__ = "0.1.0"

from .boxes import (  # noqa: F401
    Box,
    BoxAccCurve,
    best_iou,
    box_acc_sweep,
    box_iou,
    extract_boxes,
    max_box_acc_v1,
    max_box_acc_v2,
)
from .engine import (  # noqa: F401
    EvalConfig,
    center_baseline_maps,
    evaluate_boxes,
    evaluate_masks,
    pack_stream_factory,
)
from .maskmetrics import (  # noqa: F401
    PrCurve,
    TernaryMask,
    m_px_ap,
    pr_curve,
    pr_curve_exact,
    px_acc,
    px_ap,
)
from .dataset_io import (  # noqa: F401
    SplitManifest,
    read_boxes,
    read_manifest,
    read_masks,
    read_scorepack,
    validate_splits,
    write_scorepack,
)
from .scoremap import (  # noqa: F401
    ScoreMap,
    center_gaussian,
    gaussian_blur,
    normalize_max,
    normalize_minmax,
    resize_bilinear,
    threshold,
)
from .search import (  # noqa: F401
    HyperparameterSpace,
    kendall_tau,
    proxy_manifest,
    run_search,
    sample,
)
