"""Vehicle identification from roadside audio via spectral embedding."""

from .audio import AudioSignal, SegmentManifest, WindowedSignal, composite, crop, load_audio, remove_dc, window
from .classify import LabeledSet, accuracy, align_clusters, confusion, kmeans, knn_classify
from .embedding import Embedding, build_sngl, eigengap_select, smallest_eigenpairs
from .features import FeatureMatrix, band_reconstruct, moving_mean, normalize_sum, stft
from .graph import SimilarityGraph, adaptive_similarities, cosine_distances

__version__ = "0.1.0"
