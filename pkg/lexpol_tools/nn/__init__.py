from .adam import AdamState, adam_step, adam_update
from .checkpoint import Checkpoint, param_hash, read_checkpoint, write_checkpoint
from .dense import DenseNet, GradTape, mlp, softmax, softmax_backward
from .gradcheck import GradCheckReport, compare_gradients, grad_check, near_kink, numeric_gradient
