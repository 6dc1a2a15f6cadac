"""Black-box saliency and counterfactual explanations for ER classifiers."""

from .classifier import (
    BridgeMatcher,
    BridgeProtocolError,
    BridgeTransportError,
    CachingMatcher,
    HttpBridgeMatcher,
    Matcher,
    Prediction,
    ReferenceMatcher,
    mask,
    reference_score,
    score_label,
)
from .dataset import (
    Dataset,
    DatasetError,
    LabeledPair,
    Record,
    Schema,
    SIDE_U,
    SIDE_V,
    load_dataset,
    save_dataset,
    tokenize,
)
from .explainer import (
    Counterfactual,
    ExplainConfig,
    Explanation,
    ExplanationUnavailable,
    display_name,
    explain,
)
from .lattice import (
    AttributeLattice,
    AuditReport,
    FlippedNode,
    FlippingAntichain,
    PredictionStats,
    Provenance,
    Tag,
    TaggingError,
    audit_monotonicity,
    build_lattice,
    get_flipped,
    get_lmfa,
    tag_lattice,
)
from .metrics import (
    CfQuality,
    EvaluationReport,
    FaithfulnessResult,
    MetricError,
    cf_quality,
    confidence_indication,
    evaluate_split,
    faithfulness,
    masking_effect,
)
from .perturbation import PerturbedRecord, augment, psi
from .triangles import (
    DEFAULT_TAU,
    LEFT,
    OpenTriangle,
    RIGHT,
    TriangleReport,
    get_triangles,
)

__version__ = "0.1.0"
