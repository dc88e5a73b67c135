"""surfnet: inverting ReLU generator networks by surfing evolving objectives."""

from .descent import ADAM_DEFAULTS, DescentConfig, DescentResult, minimize, minimize_on_piece
from .errors import (ConfigError, InfeasiblePiece, NonFiniteEncountered,
                     OracleIntractable, SlackBudgetExceeded, SurfnetError)
from .flow import (FlowDiscretization, FlowRegularity, ParameterFlow, TrainConfig,
                   discretize, estimate_regularity, micro_train_flow)
from .landscape import (LandscapeReport, OracleConfig, OracleResult,
                        brute_force_min, verify_descent_direction)
from .network import (ActivationPattern, LayerOutputs, NetworkDims, NetworkParams,
                      activation_pattern, batch_forward, forward, init_gaussian,
                      masked_forward, masked_jacobian, operator_norm)
from .objective import MeasurementMatrix, Objective
from .pieces import (LinearPiece, PieceFamily, SlackSet, enumerate_pieces,
                     kkt_residual, piece_for, project_onto_piece, slack_set,
                     slack_size_profile)
from .rng import stream
from .surfing import SurfConfig, SurfResult, direct_descent, surf_projected, surf_simple

__version__ = "0.1.0"
