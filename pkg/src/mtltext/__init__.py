"""Desk-scale multi-task learning for text tasks.

A shared transformer encoder with per-task decoders (similarity,
relation classification, inference, sequence tagging), trained by the
pretrain -> multi-task refine -> fine-tune pipeline, with an experiment
harness for single-task vs. MTL comparisons and pairwise task affinity.
"""

from .checkpoint import ModelCheckpoint, load_checkpoint, save_checkpoint
from .encoder import EncoderConfig, encode, init_params
from .errors import (CheckpointError, ConfigError, ContractError, DataError,
                     MetricError, MtlError, NumericError, ParseError,
                     TrainingDiverged)
from .heads import TaskSpec, new_head
from .metrics import MetricResult, accuracy, entity_f1, micro_f1, pearson
from .report import PairwiseMatrix, RunReport
from .tensor import GradientTape, Tensor, backward
from .tokenizer import EncodedInput, Vocab
from .trainer import (Adamax, TrainConfig, TrainResult, adamax_update,
                      build_epoch_schedule, clip_gradients, evaluate_task,
                      fine_tune, lr_at, mlm_pretrain, mtl_refine,
                      train_single_task)

__version__ = "0.1.0"

__all__ = [
    "Adamax", "CheckpointError", "ConfigError", "ContractError", "DataError",
    "EncodedInput", "EncoderConfig", "GradientTape", "MetricError",
    "MetricResult", "ModelCheckpoint", "MtlError", "NumericError",
    "PairwiseMatrix", "ParseError", "RunReport", "TaskSpec", "Tensor",
    "TrainConfig", "TrainResult", "TrainingDiverged", "Vocab", "accuracy",
    "adamax_update", "backward", "build_epoch_schedule", "clip_gradients",
    "encode", "entity_f1", "evaluate_task", "fine_tune", "init_params",
    "load_checkpoint", "lr_at", "micro_f1", "mlm_pretrain", "mtl_refine",
    "new_head", "pearson", "save_checkpoint", "train_single_task",
]
