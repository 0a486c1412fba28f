"""protomap: open-vocabulary segmentation and 3D semantic mapping downstream
of frozen encoders.

Vision tokens are clustered into visual prototypes (PCA + k-Means); prototype
masks ground vision-language tokens through masked average pooling; prompt
similarities yield 2D masks or, with depth and poses, a language-queryable
voxel feature grid. No neural network runs inside this package — encoders sit
upstream and export token maps to tensor files.
"""

from .alignment import (
    PooledGrid,
    PromptSet,
    SimilarityMap,
    TextEmbedding,
    combined_similarity,
    masked_average_pool,
    normalize_pooled,
    normalize_similarity,
    similarity_map,
    text_embedding,
)
from .clustering import (
    ClusterModel,
    MaskSet,
    assignments_to_masks,
    kmeans_fit,
    masks_from_dense,
)
from .errors import (
    EmptyGeometryError,
    FormatError,
    IntegrityError,
    RefinerError,
    ValidationError,
)
from .evaluation import (
    Confusion,
    Metrics,
    confusion,
    format_report,
    metrics,
    project_labels_knn,
)
from .fusion import (
    QueryResult,
    SemanticCloud,
    SpatialMatrix,
    VoxelGrid,
    build_spatial_features,
    project_pooled_to_points,
    query_grid,
    scatter_assignments,
    voxel_downsample,
)
from .geometry import (
    CameraFrame,
    Intrinsics,
    MedianDepthGrid,
    PatchPointMap,
    Pose,
    backproject,
    cell_centers,
    forward_project,
    median_depth_grid,
    to_global,
)
from .grids import (
    FeatureMap,
    TokenGrid,
    TokenMatrix,
    flatten,
    l2_normalize,
    resize_bilinear,
    resize_nearest,
    stack_views,
    unflatten,
)
from .manifest import (
    PRESETS,
    PipelineConfig,
    SceneManifest,
    config_for_scene,
    config_from,
    load_manifest,
)
from .otf import read_otf, write_otf
from .pipeline import (
    evaluate2d,
    evaluate3d,
    load_grid,
    query,
    reconstruct3d,
    segment2d,
)
from .ply import label_colors, read_ply, similarity_colors, write_ply
from .reduction import PcaModel, pca_fit, pca_transform
from .refinement import (
    BinaryMask,
    ImageRef,
    RefinerHook,
    refine,
    subprocess_hook,
    threshold_mask,
    upsample_similarity,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
