from .encoders import EncoderMixture, EncoderMixtureOutput, blend_state
from .gating import (
    GateWeights,
    blend_actions,
    blend_actions_backward,
    blend_log_prob,
    blend_log_prob_backward,
    check_simplex,
    gate,
    gate_backward,
)
