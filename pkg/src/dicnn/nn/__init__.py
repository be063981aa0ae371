from .layers import (
    Dense,
    DilatedConv1d,
    GlobalAvgPool,
    Relu,
    SoftmaxCrossEntropy,
    conv_output_length,
    dilated_conv1d_backward,
    dilated_conv1d_forward,
    log_softmax,
    softmax,
)
from .network import (
    DicnnNetwork,
    LayerSpec,
    arch_id,
    conv_spec,
    default_architecture,
    dense_spec,
    validate_specs,
)
from .optim import Adam
from .train import TrainConfig, accuracy, train
from .checkpoint import (
    checkpoint_from_dict,
    checkpoint_to_dict,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    "Adam",
    "Dense",
    "DicnnNetwork",
    "DilatedConv1d",
    "GlobalAvgPool",
    "LayerSpec",
    "Relu",
    "SoftmaxCrossEntropy",
    "TrainConfig",
    "accuracy",
    "arch_id",
    "checkpoint_from_dict",
    "checkpoint_to_dict",
    "conv_output_length",
    "conv_spec",
    "default_architecture",
    "dense_spec",
    "dilated_conv1d_backward",
    "dilated_conv1d_forward",
    "load_checkpoint",
    "log_softmax",
    "save_checkpoint",
    "softmax",
    "train",
    "validate_specs",
]
