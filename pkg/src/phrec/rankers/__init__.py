"""Neural pair rankers and their hinge-loss trainer."""

from .config import DEFAULT_LR, MODELS, RankerConfig, load_config_file
from .models import (
    CDSSM,
    KNRM,
    MLP,
    MODEL_CLASSES,
    MVLSTM,
    BiLSTMSA,
    PairRanker,
    TextCNN,
    build_model,
    knrm_mus,
)
from .train import EncodedInstance, TrainResult, hinge_grad, hinge_loss, mean_reciprocal_rank, train
