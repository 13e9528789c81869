"""Contextual Graph Markov Model: layered generative encoding of labeled graphs."""

from .errors import CGMMError, ConfigError, DataError, NumericalError
from .graph import Graph, GraphDataset, build_neighbor_index, parse_dataset, serialize_dataset
from .kernels import BACKEND
from .layer import (
    LayerParams,
    StateAssignmentTable,
    TrainConfig,
    e_step,
    infer_states,
    init_params,
    log_likelihood,
    m_step,
    neighbor_frequency,
    train_layer,
)
from .stack import StackConfig, StackModel, compute_fingerprint, load_stack, save_stack, train_stack
from .validation import cross_validate

__version__ = "0.1.0"
