"""Joint beamforming and transmit/receive/off antenna assignment for monostatic ISAC."""

from . import ao, assignment, experiment, precoding, qcqp, scenario, signal_model
from .ao import AoConfig, Scheme, TrialResult, TrialStatus, run_ao, run_scheme
from .experiment import ExperimentSpec, run_experiment
from .scenario import ArrayGeometry, Scenario, SystemParams, sample_drop

__version__ = "0.1.0"

__all__ = [
    "ao", "assignment", "experiment", "precoding", "qcqp", "scenario", "signal_model",
    "AoConfig", "Scheme", "TrialResult", "TrialStatus", "run_ao", "run_scheme",
    "ExperimentSpec", "run_experiment", "ArrayGeometry", "Scenario", "SystemParams", "sample_drop",
]
