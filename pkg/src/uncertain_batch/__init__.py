"""Uncertainty-based mini-batch selection for multi-label classifiers."""

from .correlation import correlation_matrix, mutual_information, sample_weights, weighted_uncertainty
from .data import FeatureScaler, MultiLabelDataset, load_dataset, save_dataset, stratified_kfold
from .estimator import EpochRecord, UncertainBatchClassifier
from .metrics import evaluate, hamming_loss, macro_auc, ranking_loss
from .sampler import PressureSchedule, decay_pressure, draw_batch, draw_batches, quantize, selection_probabilities
from .selectors import (
    ActiveBiasSelector,
    BalanceSelector,
    OursSelector,
    RandomSelector,
    RecencyBiasSelector,
    make_selector,
)

__version__ = "0.1.0"
