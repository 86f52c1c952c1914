"""Work statistics of driven quantum systems and the level/coherence duality."""

__version__ = "0.1.0"

from .qcore import EigenSystem, hermitian_eigensystem, expm_hermitian_times_minus_i, frobenius_distance
from .model import DrivenTwoLevel, HamiltonianSchedule, hamiltonian_at, transient_eigensystem
from .propagator import PropagatorResult, evolve
from .workdist import (MeasurementScheme, MixtureComponent, MixtureDistribution, WorkDecomposition,
                       build_work_distribution, evaluate, integrate_abs, trace_distance)
from .duality import (DualityReport, ProofChainReport, closed_form_effectiveness_2level,
                      closed_form_predictability_2level, duality_report, effectiveness,
                      evolved_basis_report, min_uncertainty_scan, predictability, proof_chain_check)
from .experiment import TwoLevelExperiment, pure_state
