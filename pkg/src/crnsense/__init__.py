"""Energy-harvesting cognitive radio: traffic clustering, detection-threshold
optimisation and slot-level simulation."""

from .core import NumericalError, ParameterError, SystemParams, q_function, validate_params
from .dutycycle import ChannelPair
from .sensing import SensingModel

__version__ = "0.1.0"

__all__ = ["ChannelPair", "NumericalError", "ParameterError", "SensingModel", "SystemParams",
           "q_function", "validate_params"]
