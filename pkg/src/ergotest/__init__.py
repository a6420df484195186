"""Hypothesis testing for stationary ergodic processes via the weighted
frequency distance between finite-alphabet samples and process families."""

__version__ = "0.1.0"

from .distance import (ProjectionResult, TruncatedDistance, batch_empirical_distance,
                       distance_to_family, empirical_distance, exact_distance, family_statistics,
                       project_hmm, project_markov)
from .errors import (AlphabetError, CacheMismatchError, CalibrationError, CapExceededError,
                     DesignError, DomainError, NonUniqueStationaryError, SpecError,
                     StochasticMatrixError)
from .harness import ExperimentPlan, convergence_experiment, error_curve, trajectory_experiment
from .hypotheses import (EMConfig, FiniteSet, HMMOrder, MarkovOrder, MemberDesign, RefineConfig,
                         Singleton, family_from_spec, member_design)
from .processes import (HMMModel, IIDModel, MarkovModel, MixtureModel, ProcessModel, RotationModel,
                        model_from_spec, stationary_distribution)
from .stats import FrequencyTable, frequency, frequency_table, occurrence_count
from .symbolics import Alphabet, WeightScheme, index_to_word, tail_weight, word_to_index
from .testing import (CalibrationTable, PhiTest, PsiTest, cached_calibration, calibrate_gamma,
                      exact_rejection_probability, monte_carlo_rejection, phi_test, psi_test,
                      verify_smoothing_bounds)

__all__ = [name for name in dir() if not name.startswith("_")]
