"""Joint multilingual encoder/decoder model and training."""
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .model import (
    DecoderConfig,
    ModelParams,
    SentenceEmbedding,
    combine_avg,
    decode_nll,
    decode_nll_batch,
    encode,
    encode_backward,
    encode_batch,
    encode_corpus,
    init_model,
)
from .schedule import (
    PathSchedule,
    TrainingPath,
    many_to_one_schedule,
    one_to_one_schedule,
    one_to_rest_schedule,
    sample_path,
    validate_schedule,
)
from .training import (
    EpochRecord,
    dev_perplexity,
    dev_similarity_error,
    format_epoch_header,
    format_epoch_line,
    run_training,
    train_minibatch,
)

__all__ = [
    "CheckpointError",
    "DecoderConfig",
    "EpochRecord",
    "ModelParams",
    "PathSchedule",
    "SentenceEmbedding",
    "TrainingPath",
    "combine_avg",
    "decode_nll",
    "decode_nll_batch",
    "dev_perplexity",
    "dev_similarity_error",
    "encode",
    "encode_backward",
    "encode_batch",
    "encode_corpus",
    "format_epoch_header",
    "format_epoch_line",
    "init_model",
    "load_checkpoint",
    "many_to_one_schedule",
    "one_to_one_schedule",
    "one_to_rest_schedule",
    "run_training",
    "sample_path",
    "save_checkpoint",
    "train_minibatch",
    "validate_schedule",
]
