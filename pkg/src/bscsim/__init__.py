"""Link-level simulator and transceiver optimizer for multi-tag monostatic
backscatter communication with a full-duplex multiantenna reader."""

from .channel import (
    ChannelRealization,
    SimConfig,
    default_config,
    draw_realization,
    load_config,
    make_pilots,
    make_preamble,
    save_config,
)
from .estimation import CeObservation, CeResult, run_ce
from .numerics import ConditioningError, EigPair
from .optimize import JointResult, SdrSolution, SolverError, joint_design
from .trx import RateReport, TrxDesign, rate_report

__all__ = [
    "ChannelRealization",
    "SimConfig",
    "default_config",
    "draw_realization",
    "load_config",
    "make_pilots",
    "make_preamble",
    "save_config",
    "CeObservation",
    "CeResult",
    "run_ce",
    "ConditioningError",
    "EigPair",
    "JointResult",
    "SdrSolution",
    "SolverError",
    "joint_design",
    "RateReport",
    "TrxDesign",
    "rate_report",
]
