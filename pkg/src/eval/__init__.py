from src.eval.analysis import (
    RELIANCE_FRACTIONS,
    LandscapeGrid,
    NormHistogram2D,
    RelianceCurve,
    activation_gradient_histogram,
    drop_latent,
    feature_reliance,
    filter_normalized_direction,
    loss_landscape,
    reliance_area,
    reliance_curves,
)
from src.eval.ood import fpr_at_tpr, msp_scores, ood_metrics
from src.eval.parallel import parallel_map
from src.eval.robustness import (
    corruption_suite,
    deformation_suite,
    eval_accuracy,
    fgsm,
    fgsm_accuracy,
    mean_corruption_error,
    predict,
    robustness_report,
)

__all__ = [
    "RELIANCE_FRACTIONS",
    "LandscapeGrid",
    "NormHistogram2D",
    "RelianceCurve",
    "activation_gradient_histogram",
    "drop_latent",
    "feature_reliance",
    "filter_normalized_direction",
    "loss_landscape",
    "reliance_area",
    "reliance_curves",
    "fpr_at_tpr",
    "msp_scores",
    "ood_metrics",
    "parallel_map",
    "corruption_suite",
    "deformation_suite",
    "eval_accuracy",
    "fgsm",
    "fgsm_accuracy",
    "mean_corruption_error",
    "predict",
    "robustness_report",
]
