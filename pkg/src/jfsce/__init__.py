"""Joint frame synchronization and channel estimation by sparse recovery."""

from .equalizer import EqualizerDesign, design_mmse_equalizer, evaluate_symbol_mse
from .estimators import Method, Problem, SolverParams, estimate
from .measurement import measurement_system, training_sequence
from .signal_model import Cir, FrameConfig, NoiseSpec, build_combined_channel, channel_output, reference_cir

__version__ = "0.1.0"

__all__ = [
    "Cir", "FrameConfig", "NoiseSpec", "build_combined_channel", "channel_output", "reference_cir",
    "measurement_system", "training_sequence", "Method", "Problem", "SolverParams", "estimate",
    "EqualizerDesign", "design_mmse_equalizer", "evaluate_symbol_mse",
]
