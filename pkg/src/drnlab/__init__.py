"""drnlab: simulate, compile, and train deep resistive networks.

A deep resistive network (DRN) is a layered circuit of voltage sources,
resistors, ideal diodes, and voltage amplifiers whose DC steady state
performs inference. This package computes those steady states by exact
block coordinate descent, translates ReLU multilayer perceptrons into
approximately equivalent circuits, and trains circuits in place with
Equilibrium Propagation.
"""

__version__ = "0.1.0"

from .compiler import CompileConfig, CompilationReport, compile_relu_net, layer_gain, layer_gains, verify_compilation
from .ep import (EpConfig, EpGradients, OptimizerState, conductance_stats, ep_gradient,
                 evaluate, nudged_energy, nudged_solve, one_hot_targets, train_epoch)
from .errors import (DatasetError, DegenerateLayerError, DimensionError, DrnError,
                     FormatError, IsolatedNodeError, NumericFailureError)
from .model import (DrnParams, DrnState, encode_input, load_netlist, random_drn,
                    save_netlist, unit_polarities, with_couplings)
from .relu import (ReluActivations, ReluNet, init_relu_net, load_relu_net, make_relu_net,
                   relu_forward, save_relu_net)
from .solver import (SolveResult, SolverConfig, SteadyStateCert, amplified_layer_update,
                     certificate, energy, initial_state, kcl_residual, layer_update,
                     max_principle_check, solve_steady_state)
from .universal import abs_relu_net, demo_universal, gamma_sweep
