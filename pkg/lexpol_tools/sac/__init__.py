from .critics import TwinCritics, polyak
from .learner import EntropyTemp, actor_update, critic_targets, critic_update, temp_update
from .policy import ActionSample, GaussianPolicyHead, log_one_minus_tanh_sq, sample_action
from .replay import Batch, ReplayBuffer, Transition
