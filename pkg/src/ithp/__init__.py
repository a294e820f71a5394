"""Hierarchical information-bottleneck fusion of multimodal embeddings."""
from .data import Dataset, SynthSpec, kfold, load_dataset, synth_make, write_dataset
from .gaussian import DiagGaussian, kl_std_normal, reparameterize
from .metrics import MetricReport
from .model import ITHPConfig, forward_chain, init_params, ithp_loss, predict
from .train import TrainConfig, evaluate, fit

__version__ = "0.1.0"

__all__ = [
    "Dataset", "SynthSpec", "kfold", "load_dataset", "synth_make", "write_dataset",
    "DiagGaussian", "kl_std_normal", "reparameterize",
    "MetricReport",
    "ITHPConfig", "forward_chain", "init_params", "ithp_loss", "predict",
    "TrainConfig", "evaluate", "fit",
]
