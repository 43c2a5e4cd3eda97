from evidential_nav.autodiff_nn.checkpoint import assign_parameters, load_checkpoint, save_checkpoint
from evidential_nav.autodiff_nn.flow import AffineCoupling, FlowDensity, base_log_density, flow_log_density
from evidential_nav.autodiff_nn.layers import (
    Activation,
    Dense,
    Layer,
    Mlp,
    MlpConfig,
    Relu,
    Sigmoid,
    Softmax,
    Tanh,
    Tensor,
    mlp_forward,
)
from evidential_nav.autodiff_nn.optim import Adam, AdamState, adam_step, clip_grad_norm

__all__ = [
    "Activation",
    "Adam",
    "AdamState",
    "AffineCoupling",
    "Dense",
    "FlowDensity",
    "Layer",
    "Mlp",
    "MlpConfig",
    "Relu",
    "Sigmoid",
    "Softmax",
    "Tanh",
    "Tensor",
    "adam_step",
    "assign_parameters",
    "base_log_density",
    "clip_grad_norm",
    "flow_log_density",
    "load_checkpoint",
    "mlp_forward",
    "save_checkpoint",
]
