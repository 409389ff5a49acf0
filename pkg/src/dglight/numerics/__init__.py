from .checkpoint import CheckpointError, load_tensors, save_tensors
from .graph import Graph, GraphError, Node, finite_diff_check
from .optim import Adam, AdamState, adam_init, adam_step
from .tensor import Tensor, glorot_uniform, tensor, zeros

__all__ = [
    "Adam",
    "AdamState",
    "CheckpointError",
    "Graph",
    "GraphError",
    "Node",
    "Tensor",
    "adam_init",
    "adam_step",
    "finite_diff_check",
    "glorot_uniform",
    "load_tensors",
    "save_tensors",
    "tensor",
    "zeros",
]
