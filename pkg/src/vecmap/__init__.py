"""Vector-map set prediction toolkit.

Permutation-equivalent map elements, Hungarian matching with per-pair
point ordering, the focal/Manhattan/edge-direction training loss,
decoupled and criss-cross attention kernels with MAC accounting, and
chamfer-distance AP evaluation.
"""

from .assignment import (
    GroundTruthSet,
    MatchResult,
    PredictionSet,
    classification_cost,
    hungarian_assign,
    instance_matching,
    point_matching_cost,
)
from .attention import (
    AttentionParams,
    MacCounter,
    attention_block,
    criss_cross_attention,
    decoupled_self_attention,
    measure_scaling,
    softmax_rows,
    vanilla_self_attention,
)
from .errors import DomainError, SchemaError, VecmapError
from .evaluation import EvalConfig, EvalReport, average_precision, chamfer_distance, evaluate
from .geometry import (
    BevFrame,
    ElementKind,
    MapClass,
    MapElement,
    PermutationGroup,
    Shape,
    apply_permutation,
    denormalize,
    enumerate_permutations,
    normalize_to_bev,
    resample_element,
)
from .io import Scene, parse_scene, write_scene
from .kernels import BACKEND
from .losses import LossBreakdown, LossWeights, edge_direction_loss, focal_loss, p2p_loss, total_loss
from .raster import RasterCanvas, emit_plot, rasterize

__version__ = "0.1.0"
