"""Post-network tooling for whole-body PET/CT lesion segmentation."""

__version__ = "0.1.0"

from .cohort import (
    AggregateReport,
    Disease,
    FoldAssignment,
    ModelRanking,
    RankingConfig,
    StudyRecord,
    aggregate,
    load_manifest,
    rank_models,
    stratified_kfold,
)
from .labeling import ComponentLabeling, Connectivity, label_components, overlap_table
from .metrics import (
    StudyMetrics,
    dice_score,
    evaluate_study,
    false_negative_volume,
    false_positive_volume,
)
from .pipeline import (
    BottomRule,
    FusionConfig,
    PostprocessConfig,
    binarize,
    fuse_softmax,
    postprocess,
)
from .volume import (
    BinaryMask,
    ProbabilityMap,
    Spacing,
    VolumeGrid,
    check_compatible,
    load_volume,
    save_mask,
    save_probability,
)
