"""Adjustable-privacy obfuscation of tabular data with a split-bottleneck autoencoder."""

from .data import Dataset, SplitConfig, SynthSpec, load_adult, preprocess_adult, split, synth_generate
from .evaluate import ProbeConfig, ProtocolResult
from .obfuscator import ObfuscatorArch, ObfuscatorModel, TrainHyper, load_model, save_model, train_obfuscator
from .privatize import PrivacyParams, obfuscate_dataset, obfuscate_record
from .tradeoff import TradeoffCurve, TradeoffPoint, convex_hull_auc

__version__ = "0.1.0"
