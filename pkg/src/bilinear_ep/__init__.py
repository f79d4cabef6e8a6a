"""Bilinear expectation propagation for cell-free massive MIMO uplinks.

Joint channel estimation and data detection on a factor graph with Gaussian
channel messages and exact categorical symbol messages, plus the simulation,
baseline receivers and distributed (fronthaul) execution around it.
"""
from .baselines import centralized_lmmse_detect, pilot_only_nmse_reference
from .fronthaul import FronthaulLedger, run_distributed
from .gaussian import CategoricalMessage, Diagnostics, GaussianMessage
from .harness import ExperimentConfig, run_experiment
from .jcd import (FactorGraphState, JcdResult, detect, infer, init_state,
                  perfect_csi_prior, run_schedule)
from .pilot import ChannelPrior, estimate_channels
from .scenario import Scenario, generate_transmission, make_scenario, sample_channel

__version__ = "0.1.0"
