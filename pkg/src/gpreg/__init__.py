"""Event-triggered Gaussian-process internal-model regulator.

Simulation library for adaptive output regulation where the internal-model
nonlinearity is learned online by a Gaussian-process regressor with a
time-forgetting kernel, samples are admitted when the posterior variance
crosses a threshold, and the resulting closed loop is a hybrid system.
Includes the VTOL lateral-dynamics testbed, a linearly-parametrized
least-squares baseline for comparison, and a batch experiment CLI.
"""

from ._backend import BACKEND, available_backends
from .gp import (GpPosterior, KernelParams, Sample, SampleBuffer, fit,
                 kernel_eval, mean_gradient, posterior_mean, posterior_var,
                 push_sample)
from .hybrid import (DwellReport, FlowSegment, HybridArc, HybridSystem,
                     IntegrationError, IntegratorConfig, JumpContractError,
                     JumpRecord, dwell_time_monitor, execute_jump,
                     integrate_flow, simulate)
from .regulator import (BaselineIdentifier, InternalModelParams,
                        ObserverParams, StabilizerParams, StructureParams,
                        baseline_flow, baseline_step, build_F_H_C,
                        check_sigma_condition, control_action,
                        internal_model_flow, mu_total_derivative,
                        observer_flow, stabilizer_gains)
from .vtol import (EXO_VARIANTS, ClosedLoop, VtolParams, assemble_closed_loop,
                   disturbance, exo_flow, ideal_friend, q_omega,
                   raw_to_transformed, transformed_flow, transformed_to_raw,
                   vtol_control_law, vtol_raw_flow)

__version__ = "0.1.0"
