"""Benchmark harness for visual-explanation heatmaps: generation, faithfulness metrics, sanity checks."""

from .core import (
    ILSVRC_MEAN,
    ILSVRC_STD,
    ClassScoreVector,
    ColorSpace,
    ImageTensor,
    NormalizationSpec,
    SaliencyMap,
    gaussian_blur,
    minmax_scale,
    normalize,
    resize_bilinear,
)
from .faithfulness import (
    BlurBaseline,
    Curve,
    DatasetMeanBaseline,
    PixelGranularity,
    RegionGranularity,
    UniformNoiseBaseline,
    auc,
    deletion_curve,
    insertion_curve,
    make_baseline,
    perturbation_order,
)
from .models import ConstantModel, ModelAdapter, RegionMeanModel, ScoreRequest, score_batch
from .pointmetrics import (
    AggregateScores,
    BoundingBox,
    DropResult,
    aggregate,
    average_drop,
    binarize,
    mask_image,
    pointing_game,
)
from .protocol import RemoteScorer, conformance_report, remote_score
from .road import ImputationConfig, PixelMask, impute, road_score
from .saliency import (
    KdeCurve,
    OcclusionConfig,
    RiseConfig,
    coarsen,
    occlusion,
    postprocess,
    rise,
    sparsity_kde,
)
from .sanity import (
    CorrelationTable,
    InterMethodResult,
    MetricSeries,
    Polarity,
    SeriesKind,
    inter_method,
    internal_consistency,
    point_biserial,
    spearman,
)
from .smap import load_smap, save_smap

__version__ = "0.1.0"
