"""Collaborative filtering research toolkit: data model, parallel passes,
KNN and PMF recommenders, and quality measures."""

from .datamodel import RatingsModel, RatingTriple, build_model, load_dataset
from .engine import ElementPass, PassTarget, run_pass
from .knn import Aggregation, Orientation, get_similarity
from .mf import FactorModel, train_pmf
from .quality import MeasureScore, ResultsGrid

__all__ = [
    "Aggregation",
    "ElementPass",
    "FactorModel",
    "MeasureScore",
    "Orientation",
    "PassTarget",
    "RatingTriple",
    "RatingsModel",
    "ResultsGrid",
    "build_model",
    "get_similarity",
    "load_dataset",
    "run_pass",
    "train_pmf",
]
