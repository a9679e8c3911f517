"""Per-listener music preference scoring from four-channel EEG."""

from .config import PipelineConfig
from .descriptors import DescriptorId, all_descriptor_ids, descriptor_vector
from .elm import ElmModel, elm_predict, elm_train, load_model, nrmse, save_model
from .features import FeatureMatrix, extract_features, read_matrix, write_matrix
from .ingest import Session, read_session, write_session
from .stats import FIXED_BIOMARKER, distance_correlation, rank_descriptors, select_biomarker

__all__ = [
    "PipelineConfig", "DescriptorId", "all_descriptor_ids", "descriptor_vector",
    "ElmModel", "elm_predict", "elm_train", "load_model", "nrmse", "save_model",
    "FeatureMatrix", "extract_features", "read_matrix", "write_matrix",
    "Session", "read_session", "write_session",
    "FIXED_BIOMARKER", "distance_correlation", "rank_descriptors", "select_biomarker",
]
__version__ = "0.1.0"
