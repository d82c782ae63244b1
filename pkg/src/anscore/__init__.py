"""anscore: interpretable short-answer scoring.

Pipeline: extract analytic components from response corpora, featurize
each response on a ternary paraphrase scale with first-to-three
aggregation, score with immediate-threshold ordinal logistic regression,
and serve faithful, traceable, human-overridable explanations.
"""

from .dataset import Dataset, Item, PartSpec, Response
from .errors import AnscoreError
from .explain import Counterfactual, Explanation, OverrideRecord, apply_overrides, explain, rescore_with_overrides
from .extraction import AnalyticComponent, ComponentSet, extract_components
from .featurize import (
    FeatureLabel,
    FeatureMatrix,
    FeatureVector,
    aggregate_first_to_three,
    featurize_corpus,
    featurize_response,
    mock_label_rule,
)
from .gateway import ChatGateway, CompletionRequest, CompletionResult, HttpBackend, MockBackend, cache_key
from .metrics import (
    IntervalEstimate,
    RatingsTable,
    bootstrap_ci,
    classwise_f1,
    krippendorff_alpha,
    majority_vote,
    qwk,
    wilcoxon_signed_rank,
)
from .ordinal import OrdinalModel, TrainConfig, contribution_table, eta, it_loss, predict, train

__version__ = "0.1.0"

__all__ = [
    "AnalyticComponent",
    "AnscoreError",
    "ChatGateway",
    "ComponentSet",
    "CompletionRequest",
    "CompletionResult",
    "Counterfactual",
    "Dataset",
    "Explanation",
    "FeatureLabel",
    "FeatureMatrix",
    "FeatureVector",
    "HttpBackend",
    "IntervalEstimate",
    "Item",
    "MockBackend",
    "OrdinalModel",
    "OverrideRecord",
    "PartSpec",
    "RatingsTable",
    "Response",
    "TrainConfig",
    "aggregate_first_to_three",
    "apply_overrides",
    "bootstrap_ci",
    "cache_key",
    "classwise_f1",
    "contribution_table",
    "eta",
    "explain",
    "extract_components",
    "featurize_corpus",
    "featurize_response",
    "it_loss",
    "krippendorff_alpha",
    "majority_vote",
    "mock_label_rule",
    "predict",
    "qwk",
    "rescore_with_overrides",
    "train",
    "wilcoxon_signed_rank",
]
