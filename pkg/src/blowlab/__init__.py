"""Spectral and nonlinear stability laboratory for boosted ODE blow-up of the
focusing wave equation ``u_tt - lap u = |u|^(p-1) u`` in similarity variables."""
from .discretization import (Discretization, StateVector, build_disc, interpolate,
                             radial_sectors, sample_state, sobolev_norm)
from .errors import *  # noqa: F401,F403
from .evolution import (EvolutionTrace, correction_term, evolve_linear, evolve_nonlinear,
                        fit_decay_rate, nonlinearity, stabilized_fixed_point)
from .lorentz import (boost_physical, boost_selfsim, eigenfunction_pullback,
                      eigenfunction_pushforward, make_chart)
from .operator import (GeneratorMatrix, assemble_generator, eigen_equation_residual,
                       symmetry_residual)
from .params import (ModelParams, kappa_d, kappa_lower_bound, make_params, potential_V,
                     profile_pair, symmetry_modes, u_star)
from .shooting import (ShootingResult, classify_trapping, expansion_remainder, initial_data_Q,
                       random_smooth_data, solve_parameters)
from .spectrum import (SpectrumReport, eigendecompose, filter_stable_eigs,
                       mode_stability_verdict, riesz_projectors, spectral_equivalence_check,
                       spectral_split)

__version__ = "0.1.0"
