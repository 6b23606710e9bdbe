from .base import (
    DEGENERATE_SCORE,
    OraclePredictor,
    Prediction,
    Predictor,
    RandomPredictor,
)

__all__ = [
    "DEGENERATE_SCORE",
    "OraclePredictor",
    "Prediction",
    "Predictor",
    "RandomPredictor",
]
