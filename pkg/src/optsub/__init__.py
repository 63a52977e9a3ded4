"""Optimal subsampling for Cox regression and logistic regression with rare or balanced outcomes."""

from .errors import (
    AllZeroScores,
    AllZeroWeights,
    DimensionMismatch,
    EmptyPool,
    EmptyRiskSet,
    NotConverged,
    NotPositiveDefinite,
    OneClassEmpty,
    OptsubError,
    OutOfRange,
    ParseError,
    QExceedsN,
    SchemaError,
    Separation,
    Singular,
    ZeroProbability,
)
from .fit import WeightedFit
from .logistic import BinaryDataset, fit_logistic
from .survival import SurvivalDataset, fit_cox

__version__ = "0.1.0"

__all__ = [
    "AllZeroScores",
    "AllZeroWeights",
    "BinaryDataset",
    "DimensionMismatch",
    "EmptyPool",
    "EmptyRiskSet",
    "NotConverged",
    "NotPositiveDefinite",
    "OneClassEmpty",
    "OptsubError",
    "OutOfRange",
    "ParseError",
    "QExceedsN",
    "SchemaError",
    "Separation",
    "Singular",
    "SurvivalDataset",
    "WeightedFit",
    "ZeroProbability",
    "fit_cox",
    "fit_logistic",
]
