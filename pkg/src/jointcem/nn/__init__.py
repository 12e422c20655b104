from .layers import Parameters, attention, sinusoidal_positions, transformer_block
from .optim import AdamState, adam_step
from .tensor import Tensor, no_grad

__all__ = [
    "AdamState",
    "Parameters",
    "Tensor",
    "adam_step",
    "attention",
    "no_grad",
    "sinusoidal_positions",
    "transformer_block",
]
