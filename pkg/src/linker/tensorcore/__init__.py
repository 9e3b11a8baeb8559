from .checkpoint import load_checkpoint, save_checkpoint
from .kernels import BACKEND
from .optim import Adam, adam_step
from .tensor import (
    Tensor,
    add,
    as_tensor,
    backward,
    broadcast_to,
    clip,
    concat,
    conv2d,
    div,
    exp,
    getitem,
    l2_normalize,
    layer_norm,
    log,
    matmul,
    max_,
    max_pool2d,
    mean,
    mul,
    no_grad,
    pad2d,
    pow_,
    relu,
    reshape,
    sigmoid,
    softmax,
    sqrt,
    sub,
    sum_,
    take_rows,
    transpose,
    up_sample2d,
)
