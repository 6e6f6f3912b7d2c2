"""Image collation: find corresponding illustrations across manuscript copies."""
from .features import (
    DEFAULT_SCALE_TAGS,
    FeatureMap,
    FeaturePyramid,
    ManuscriptFeatures,
    grid_positions,
    load_feature_map,
    load_manuscript,
    read_feature_map,
    save_feature_map,
    save_manuscript,
    synth_manuscripts,
    local_permutation,
    write_feature_map,
)
from .similarity import (
    DEFAULT_SIGMA,
    AffineTransform,
    Match,
    MatchSet,
    SimilarityConfig,
    best_matches,
    cosine,
    ransac_affine,
    ransac_objective,
    s_features,
    s_matching,
    s_trans,
    similarity_matrix,
)
from .matrices import (
    NormalizationScheme,
    PropagationConfig,
    SeedSet,
    SimilarityMatrix,
    load_matrix,
    normalize,
    propagate,
    save_matrix,
    three_cycle_seeds,
    two_cycle_seeds,
)
from .correspondence import (
    Correspondence,
    CorrespondenceSet,
    EvalReport,
    accuracy,
    argmax_correspondences,
    evaluate,
    greedy_one_to_one,
    load_correspondences,
    map_at_r,
    nn_recall,
    recall_at_n,
    save_correspondences,
    top_k,
)
from .project import (
    ImageStore,
    PipelineConfig,
    Project,
    StageOrderError,
)

__version__ = "0.1.0"
