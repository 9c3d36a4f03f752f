"""Vision-trap configuration toolkit for vibratory part feeders.

Pipeline: mesh -> stable resting poses and priors -> noisy silhouette
observations and a classifier surrogate -> pose confusion matrix and
ambiguity-driven pose reduction -> vision/mechanical trap transition
matrices -> brute-force feeder design search with a Monte Carlo check.
"""

from .confusion import (
    CollapsePartition,
    ConfusionMatrix,
    MergeStep,
    collapse_pair,
    confusion_matrix,
    reduce,
    score,
)
from .designer import (
    Candidate,
    DesignProblem,
    DesignResult,
    evaluate,
    iter_candidates,
    search,
    search_size,
    simulate_flow,
)
from .errors import (
    CatalogError,
    FeedtrapError,
    InputError,
    MeshError,
    RecordError,
    SearchCapExceeded,
)
from .geometry import (
    BinaryMask,
    ConvexHull,
    HullFace,
    MassProperties,
    Rotation,
    TriMesh,
    angular_distance,
    convex_hull,
    load_mesh,
    mass_properties,
    render_silhouette,
)
from .stable_poses import (
    PoseGraph,
    PoseSet,
    Settler,
    StablePose,
    TrackConfig,
    cluster_rotations,
    enumerate_resting_faces,
    estimate_priors_solid_angle,
    identify_stable_poses,
    settle,
)
from .synthetic_vision import (
    ClassificationRecord,
    ClassifierModel,
    FeatureVector,
    ObservationConfig,
    classify,
    extract_features,
    generate_dataset,
    generate_observation,
    load_records,
    records_to_jsonl,
    train_classifier,
)
from .transitions import (
    TransitionMatrix,
    ValidationReport,
    VisionTrapConfig,
    apply,
    catalog_to_json,
    chain,
    enumerate_vision_configs,
    identity_trap,
    initial_distribution,
    load_catalog,
    validate,
    vision_trap_matrix,
)

__version__ = "0.1.0"
