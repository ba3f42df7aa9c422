"""From-scratch differentiable kernel: embeddings, relational message
passing (RGCN/RGAT), readout, classifier, training, gradient checks.
"""
from commitrisk.neural.autograd import Tensor
from commitrisk.neural.embedding import (EmbeddingTable, SkipgramConfig, Vocab,
                                         build_vocab, node_features,
                                         skipgram_pretrain)
from commitrisk.neural.model import (CheckpointError, CommitRiskModel,
                                     EmptyGraph, HyperParams, LayerParams,
                                     NonFiniteLoss, Prediction, ShapeMismatch,
                                     TrainConfig, grad_check, load_checkpoint,
                                     loss_bce, model_forward, new_model,
                                     readout, rgat_forward, rgcn_forward,
                                     save_checkpoint, train)

__all__ = [
    "Tensor",
    "Vocab", "EmbeddingTable", "SkipgramConfig",
    "build_vocab", "skipgram_pretrain", "node_features",
    "HyperParams", "LayerParams", "TrainConfig", "CommitRiskModel",
    "Prediction", "ShapeMismatch", "EmptyGraph", "NonFiniteLoss",
    "CheckpointError",
    "new_model", "rgcn_forward", "rgat_forward", "readout", "model_forward",
    "loss_bce", "train", "grad_check", "save_checkpoint", "load_checkpoint",
]
