from .base import (
    ClassifierModel,
    ClassifierSpec,
    EnsemblePredictor,
    Encoder,
    ensemble_of,
    ensemble_predict,
    predict_label,
    predict_proba,
    train_classifier,
)

__all__ = [
    "ClassifierModel",
    "ClassifierSpec",
    "EnsemblePredictor",
    "Encoder",
    "ensemble_of",
    "ensemble_predict",
    "predict_label",
    "predict_proba",
    "train_classifier",
]
