"""
Robust aerial-RIS secrecy simulator
Worst-case secrecy-rate optimisation for a network with a fixed RIS and an aerial
platform carrying a second RIS and a friendly jammer
"""
from .channel import ChannelSet, build_channels
from .errors import (ChannelError, LmiError, OracleBudgetError, ScenarioError, SecureArisError,
                     SolverError, TrainingDivergedError)
from .inner_opt import TransmitStrategy, bcd_solve, certify_strategy
from .scenario import Placement, Scenario, default_scenario, desk_scenario
from .secrecy_eval import secrecy_rate, worst_case_rate

__version__ = "1.0.0"
