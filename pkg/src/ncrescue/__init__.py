from .analytic import (ChannelParams, FlowLedger, analytic_gain, lambda_arq,
                       lambda_ear, lambda_ncarq, pattern_flow_solve,
                       sort_channel)
from .channel import FecModel, RngStream, ber_to_per, sample_round
from .config import ExperimentConfig, load_config
from .harness import GainRow, gain, run_experiment
from .overhead import HeaderModel, header_len, worst_case_total
from .patterns import (DestinationSet, LossPattern, can_code, dominates,
                       unique_code_group)
from .schemes import ARQ, EAR, NCARQ, Simulation, TrialResult, run_trial

__all__ = [
    "ARQ",
    "NCARQ",
    "EAR",
    "ChannelParams",
    "DestinationSet",
    "ExperimentConfig",
    "FecModel",
    "FlowLedger",
    "GainRow",
    "HeaderModel",
    "LossPattern",
    "RngStream",
    "Simulation",
    "TrialResult",
    "analytic_gain",
    "ber_to_per",
    "can_code",
    "dominates",
    "gain",
    "header_len",
    "lambda_arq",
    "lambda_ear",
    "lambda_ncarq",
    "load_config",
    "pattern_flow_solve",
    "run_experiment",
    "run_trial",
    "sample_round",
    "sort_channel",
    "unique_code_group",
    "worst_case_total",
]
