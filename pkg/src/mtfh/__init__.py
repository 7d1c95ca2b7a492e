"""Cross-modal hashing by discrete matrix tri-factorisation with unequal code lengths."""

from .affinity import AffinityMatrix, affinity_inner, affinity_rbf
from .dataset import DatasetSplit, ModalityData, load_modality, make_unpaired, split, synth_multimodal
from .encoder import encode, translate
from .model import TrainedModel, load_model, save_model
from .optimizer import OptimizerConfig, TrainState, train_codes
from .pipeline import RunConfig, fit_model
from .retrieval import CodeIndex, RankedResult, hamming, rank

__version__ = "0.1.0"
