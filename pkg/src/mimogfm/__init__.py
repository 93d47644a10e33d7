"""Modeling, H-infinity tuning and simulation of multivariable grid-forming
converters with cascaded voltage/current controllers."""
from .cascade import CascadeGains, CascadeState, cascade_commands, cascade_deriv
from .closedloop import (STATE_NAMES, THETA_NAMES, Disturbance, EquilibriumError, FullState, GainSet,
                         closedloop_deriv, find_equilibrium, flat_start)
from .gfm import GfmGains, GfmState, References, gfm_deriv, gfm_error, gfm_output, phi_eval
from .hinf import (DEFAULT_CHANNELS, W11, W12, W21, SynthesisContext, SynthesisProblem, Weight, evaluate,
                   hinf_norm_bisection, hinf_norm_grid, objective, synthesize, weighted_channel)
from .kernel import BACKEND
from .linear import LtiSystem, freq_response, linearize, spectral_abscissa
from .plant import (ControlInput, ModelDomainError, PlantOutputs, PlantParams, PlantState, params_from_si,
                    plant_deriv, plant_outputs)
from .sim import STEP_SCENARIOS, Scenario, SimTrace, metrics, simulate, step_consistency

__version__ = "0.1.0"
