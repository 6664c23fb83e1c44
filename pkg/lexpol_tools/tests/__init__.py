import contextlib
import dataclasses
import io
import json
import os
import tempfile
from pathlib import Path
from textwrap import dedent
from unittest import TestCase
from unittest.mock import patch

import numpy as np
from numpy import testing as npt
from scipy import stats

from ..agent import (
    AgentConfig,
    CompositeActor,
    LexpolAgent,
    RunLog,
    Schedule,
    Trainer,
    load_config,
    parse_config,
    train,
)
from ..context import ContextEncoder, EmbeddingTable, TaskMetadata, embed_hashed, embed_table
from ..envs import (
    BLUE_TEXT,
    COMPOSITE_TEXT,
    RED_TEXT,
    CompositeTask,
    NavContext,
    NavEnv,
    Phase,
    TaskSuite,
    TMazeContext,
    TMazeEnv,
    TMazeGeometry,
    make_suite,
    metadata_for_phase,
    read_suite_file,
    resolve_suite,
    write_suite_file,
)
from ..evaluation import (
    DominanceMap,
    EvalSnapshot,
    aggregate,
    compare,
    emit_dominance_map,
    evaluate,
    welch_bonferroni,
    write_series_csv,
)
from ..mixture import (
    EncoderMixture,
    GateWeights,
    blend_actions,
    blend_actions_backward,
    blend_log_prob,
    check_simplex,
    gate,
)
from ..nn import (
    AdamState,
    DenseNet,
    adam_update,
    compare_gradients,
    grad_check,
    mlp,
    numeric_gradient,
    param_hash,
    read_checkpoint,
    softmax,
    softmax_backward,
    write_checkpoint,
)
from ..sac import (
    Batch,
    EntropyTemp,
    GaussianPolicyHead,
    ReplayBuffer,
    Transition,
    TwinCritics,
    critic_targets,
    polyak,
    temp_update,
)
from ..utils.errors import (
    ArgumentError,
    CheckpointError,
    ConfigError,
    NumericError,
    ShapeError,
    StateError,
    TaskLookupError,
    exit_code_for,
    leaf_exceptions,
)
from ..utils.exception_stack import ExceptionStack
from ..utils.parameterized_class_factory import ParameterizedClassFactory
from ..utils.rng import RandomStreams


def tiny_agent_config(mode: str = "lexpol", **overrides) -> AgentConfig:
    """Small networks and batches, so whole training runs take seconds."""
    fields = dict(
        mode=mode,
        k=2,
        n=8,
        raw_embed_dim=8,
        context_hidden=8,
        gate_hidden=(8,),
        k_enc=2,
        encoder_hidden=8,
        repr_dim=6,
        hidden=(16, 16),
        batch_per_task=8,
        replay_capacity=2000,
        warmup_steps=10,
    )
    fields.update(overrides)
    return AgentConfig(**fields)


def small_tmaze(name: str = "tmaze_pair", horizon: int = 20, **params) -> TaskSuite:
    return make_suite(name, {"horizon": horizon, **params})


def raised_leaves(exc: BaseException) -> list:
    return list(leaf_exceptions(exc))
