from docembed.nn.encoder import (
    EncoderConfig,
    EncoderOutput,
    EncoderParams,
    backward_batch,
    forward,
    forward_batch,
    init_params,
)
from docembed.nn.losses import bce_loss, bce_multilabel, info_nce_batch, infonce_loss
from docembed.nn.optim import Adam
from docembed.nn.trainer import (
    DocumentEmbedder,
    TaskDataset,
    TrainConfig,
    sample_task,
    train_step,
)

__all__ = [
    "EncoderConfig",
    "EncoderOutput",
    "EncoderParams",
    "init_params",
    "forward",
    "forward_batch",
    "backward_batch",
    "infonce_loss",
    "info_nce_batch",
    "bce_loss",
    "bce_multilabel",
    "Adam",
    "TrainConfig",
    "TaskDataset",
    "sample_task",
    "train_step",
    "DocumentEmbedder",
]
