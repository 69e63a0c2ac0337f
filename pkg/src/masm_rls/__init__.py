"""RLS detection of multiple-active spatial modulation MIMO signals.

Monte Carlo simulation of box-LASSO detectors alongside their
large-system MSE and error-rate predictions from a scalar decoupled
channel.
"""
from .channel import ChannelEnsemble, sample_channel, sigma2_from_snr_db, transmit
from .codec import SmCodebook, build_codebook, decode, encode
from .config import ExperimentConfig, load_config, default_config
from .detector import DecisionRule, DetectorSpec, SolverParams, decide, solve_box_lasso
from .replica import DecoupledConfig, solve_fixed_point, tune_lambda
from .spectral import SpectralModel

__version__ = "0.1.0"
