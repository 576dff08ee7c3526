"""Numerical laboratory for Dirichlet-stationary dynamics on the simplex.

Exact Dirichlet arithmetic and samplers, the generator spectrum computed
three independent ways, an Euler-Maruyama simulator for the degenerate SDE,
the companion reversible population chain, and finite truncations of the
infinite-coordinate model.
"""

from .chain import (
    ChainSpec,
    chain_spectral_gap,
    chain_spectrum,
    detailed_balance_check,
    enumerate_states,
    generator_apply,
    generator_matrix,
    gillespie,
    stationary_measure,
    transition_rates,
)
from .diffusion import (
    DecayFit,
    EnsembleStats,
    SimConfig,
    Trajectory,
    decay_rate_fit,
    default_dt,
    em_step,
    simulate,
    simulate_ensemble,
)
from .errors import CapacityError, CheckFailed, InconclusiveError, NumericalError
from .polynomials import Polynomial, expectation, variance
from .simplex import (
    AlphaParams,
    SimplexPoint,
    aggregate,
    aggregate_point,
    log_density,
    monomial_expectation,
    polya_urn,
    polya_urn_array,
    sample,
    sample_array,
    write_samples_csv,
)
from .spectrum import (
    DegreeBlockMatrix,
    EigenMultiset,
    SpectrumKey,
    SpectrumRecursion,
    apply_generator,
    degree_block,
    degree_multi_indices,
    degree_one_eigenbasis,
    dirichlet_energy,
    eigenvalue_multiset,
    enumerate_spectrum_keys,
    homogeneous_dim,
    multisets_agree,
    poincare_ratio,
    poincare_ratio_mc,
    spectral_gap,
    spectrum_by_keys,
    spectrum_by_recursion,
)
from .truncation import (
    CouplingReport,
    GemParams,
    WitnessReport,
    coupled_truncations,
    truncate_params,
    verify_gap_witness,
    wasserstein_truncation_bound,
)

__version__ = "0.1.0"
