"""Traffic-pattern clustering: DP mixture (Gibbs, VB) and a K-means baseline."""

from .gibbs import GibbsState, gibbs_fit
from .kmeans import kmeans_fit, wcss
from .metrics import (
    SubchannelProfile,
    clustering_accuracy,
    crp_conditional,
    select_channels,
    stick_breaking_weights,
)
from .model import ClusterModel, standardize
from .niw import NiwPrior, SuffStats, posterior_params, posterior_predictive, predictive
from .vb import ElboDecreaseError, VbState, vb_fit

__all__ = [
    "ClusterModel", "ElboDecreaseError", "GibbsState", "NiwPrior", "SubchannelProfile",
    "SuffStats", "VbState", "clustering_accuracy", "crp_conditional", "gibbs_fit",
    "kmeans_fit", "posterior_params", "posterior_predictive", "predictive",
    "select_channels", "standardize", "stick_breaking_weights", "vb_fit", "wcss",
]
