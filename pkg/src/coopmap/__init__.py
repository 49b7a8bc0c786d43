"""Distributed sparse online Gaussian-process mapping for robot teams."""
from .consensus import (
    BoundConstants,
    ConsensusParams,
    ConsensusState,
    centralized_poe,
    check_bound,
    consensus_step,
    recover_map,
    reference_input,
    theorem1_bounds,
)
from .gp_core import (
    Dataset,
    GaussianMap,
    KernelSpec,
    Observation,
    OnlineGP,
    RecursiveState,
    batch_predict,
    kernel_eval,
    recursive_add,
    recursive_predict,
    remove_point,
)
from .sparsify import SparsityConfig, br_distance, compress, distributed_metric, local_score

__version__ = "0.1.0"
