"""Metropolis-Hastings with Rao-Blackwellised occupation weights."""
from .core import (
    ChainRecord, OffSupportError, ProposalKernel, ProposalKind, TargetModel,
    acceptance_prob, decompose_chain, expand_blocks, log_acceptance, mh_step, run_chain,
)
from .estimators import (
    EstimateSet, delta_cv, delta_k, delta_oracle, delta_plain, delta_plain_blocks, estimate_all,
)
from .streams import ChainStreams
from .weights import (
    PRPair, WeightSpec, attach_control_variates, attach_weights, control_variate_draw,
    var_xi_inf_closed, var_xi_k_closed, xi_hat_k, xi_hat_k_batch,
)

__version__ = "0.1.0"
