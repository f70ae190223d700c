"""Long-sequence gate set tomography for a single qubit."""

__version__ = "0.1.0"

from .dataset import DataSet
from .design import FiducialSet, SequenceCatalog, build_catalog, default_fiducials, default_germs, default_schedule
from .errors import CPTruncationError, GSTError, InputError, NumericalError, ParseError
from .estimation import EstimateBundle, FitConfig, lgst, run_pipeline
from .gateset import GateSet, ideal_gateset, outcome_probability
from .gauge import GaugeWeights, optimize_gauge
from .sequences import GateSequence, format_sequence, parse_sequence
from .simulate import CompositeModel, NoiseSpec, apply_noise, simulate_composite, simulate_dataset

__all__ = [
    "CPTruncationError",
    "CompositeModel",
    "DataSet",
    "EstimateBundle",
    "FiducialSet",
    "FitConfig",
    "GSTError",
    "GateSequence",
    "GateSet",
    "GaugeWeights",
    "InputError",
    "NoiseSpec",
    "NumericalError",
    "ParseError",
    "SequenceCatalog",
    "apply_noise",
    "build_catalog",
    "default_fiducials",
    "default_germs",
    "default_schedule",
    "format_sequence",
    "ideal_gateset",
    "lgst",
    "optimize_gauge",
    "outcome_probability",
    "parse_sequence",
    "run_pipeline",
    "simulate_composite",
    "simulate_dataset",
]
