from .actor import GROUPS, ActorOutput, CompositeActor, load_experts
from .config import (
    AgentConfig,
    ExperimentConfig,
    RunConfig,
    resolve_expert_path,
    agent_config_from_meta,
    config_from_entries,
    load_config,
    parse_config,
)
from .lexpol_agent import LexpolAgent, load_embedding_table
from .runlog import RunLog
from .soundness import SoundnessCase, run_soundness_suite
from .trainer import (
    MetadataRegistry,
    Schedule,
    Trainer,
    latest_checkpoint,
    merge_single_task_logs,
    mtsac_flat_baseline,
    train,
)
