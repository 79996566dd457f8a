"""Aligned interference neutralization simulator for two-hop 2x2x2 relay networks."""

__version__ = "0.1.0"

from .beamforming import (
    BeamformerSet,
    IndependenceReport,
    alignment_residuals,
    first_hop_beamformers,
    independence_report,
    mimo_eigen_distinct,
    phase_condition,
    second_hop_beamformers,
)
from .channel import (
    ChannelRealization,
    DiagonalExtension,
    RealRotation,
    extend,
    sample_channel,
    to_real_rotation,
)
from .errors import (
    CapacityError,
    ConditioningError,
    ConfigurationError,
    DegenerateInputError,
    ParameterError,
    SimulationError,
    SingularChannelError,
)
from .metrics import dof_slope, end_to_end_matrix, residual_interference_ratio, sum_rate
from .multihop import GainAssignment, effective_matrix, reduce_to_two_hops, solve_gains, two_hop_infeasibility
from .rational import build_config, monomial_directions, rate_lower_bound, run_rational_trial
from .relay import forward_linear, hard_decide, isolate
from .transceiver import AlignedLink, StreamFrame, TdmaLink, decode_d1, decode_d2, encode
