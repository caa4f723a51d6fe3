from .tensor import Tensor, ShapeError, check_finite
from .layers import (
    BatchNorm, Conv2d, ConvTranspose2d, Dropout, Linear, Module, ReLU,
    Sequential, Sigmoid, batchnorm, conv2d, conv_transpose2d, dropout, linear,
)
from .optim import Sgd
from .kernels import ACTIVE_BACKEND
