"""Small numpy neural-network toolkit with manual gradients."""

from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import numeric_grad, relative_error
from .layers import (
    BiLSTM,
    Conv1d,
    LSTM,
    Linear,
    Module,
    SelfAttention,
    asym_cosine_backward,
    asym_cosine_forward,
    cosine_backward,
    cosine_forward,
    dot_interaction_backward,
    dot_interaction_forward,
    k_max_pool_backward,
    k_max_pool_forward,
    l2_normalize_backward,
    l2_normalize_forward,
    max_pool_over_time_backward,
    max_pool_over_time_forward,
    rbf_kernel_pool_backward,
    rbf_kernel_pool_forward,
    relu_backward,
    relu_forward,
    softmax_backward,
    softmax_forward,
    tanh_backward,
    tanh_forward,
)
from .optim import Adagrad, Adam, Optimizer, make_optimizer
from .tensor import Parameter, ShapeError, default_dtype, set_default_dtype
