"""Qubit-field correlations under a smooth Robertson-Walker expansion.

A qubit entangled with a scalar mode in the asymptotic past is followed into
the future, where cosmological particle creation redistributes the
correlations among qubit, boson ``k`` and antiboson ``-k``.
"""
from .errors import (DegenerateFitError, GammaPoleError, NumericalFault, OutOfRegimeError,
                     RWQCError, TruncationError, ValidationError)
from .estimate import EstimationResult, Observation, ObservationSet, fit_parameters
from .measures import CorrelationReport, entropies, mutual_information, negativity_pk, negativity_pmk, report
from .spectrum import BogoliubovData, CosmologyParams, ModeParams, bogoliubov, frequencies

__version__ = "0.1.0"
