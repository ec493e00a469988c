from .layers import GRUCell, Linear, MultiHeadAttention, ParamStore
from .optim import Adam
from .tensor import ShapeError, Tensor, no_grad

__all__ = ["Adam", "GRUCell", "Linear", "MultiHeadAttention", "ParamStore", "ShapeError", "Tensor", "no_grad"]
