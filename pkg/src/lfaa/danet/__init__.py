"""Desk-scale DA2N: shear branches sharing a pyramid reconstruction net, then a fusion net."""
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .graph import (Graph, LayerSpec, NonFiniteActivation, build_da2n, build_fusion_net,
                    build_reconstruction_net)
from .model import (DEFAULT_SHEARS, NetworkParams, backward, build_network, forward, forward_batch,
                    init_params, init_prefilter_layer, loss_l1)
from .train import TrainConfig, TrainingDiverged, TrainResult, evaluate_loss, train

__all__ = [
    "CheckpointError", "DEFAULT_SHEARS", "Graph", "LayerSpec", "NetworkParams", "NonFiniteActivation",
    "TrainConfig", "TrainResult", "TrainingDiverged", "backward", "build_da2n", "build_fusion_net",
    "build_network", "build_reconstruction_net", "evaluate_loss", "forward", "forward_batch",
    "init_params", "init_prefilter_layer", "load_checkpoint", "loss_l1", "save_checkpoint", "train",
]
