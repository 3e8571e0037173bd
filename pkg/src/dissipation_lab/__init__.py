"""Energy-dissipation diagnostics for rough Euler and Burgers fields."""
from ._backend import backend, set_backend, use_backend
from .errors import (ClassificationError, DomainError, InputError, LabError, ParameterError,
                     PreconditionError, RegistryError, ResolutionError, StageError)
from .grid import Grid, SampledField, increment, interior_window
from .mollify import KernelProfile, build_kernel, mollify, self_convolve
from .flux import (FluxScan, bd_flux_pair, cet_flux, dr_flux, energy_balance_residual, flux_scan,
                   reynolds_stress, vorticity_form_residual)
from .local_structure import alpha_bar, alpha_profile, classify_point
from .kernel_opt import AnisotropyProblem, anisotropy_functional, optimize_kernel, trace_lower_bound
from .scenarios import generate_scenario, scenario_ids
from .experiment import ExperimentConfig, emit_results, run_experiment

__version__ = "0.1.0"
