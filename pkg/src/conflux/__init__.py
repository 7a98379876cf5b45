"""Canonical solutions, connection matrices and confluence of fuchsian
linear difference systems via factorial series and Gamma characters."""

from .connection import (ConnectionMatrix, MonodromyReport, StripDecomposition,
                         connection_matrix, frobenius_solution, monodromy,
                         ode_monodromy_oracle, strip_limits, strip_partition)
from .diffsystem import (CanonicalSolution, DifferenceSystem, canonical_solution,
                         continue_solution, gauge_series, minus_transform, residual)
from .errors import ConfluxError
from .factseries import (Certificate, FactorialSeries, coefficient_limits, expand_rational,
                         invert, multiply, translate)
from .jet import Jet
from .rational import RationalMatrix
from .spectral import (SpectralData, check_deployment, check_nonresonant, decompose,
                       operator_k_bound, sylvester_solve)
from .specfun import CharacterKind, character, log_char_jet, log_gamma, matrix_character

__version__ = "0.1.0"
