from .base import StepResult, TaskEnv, TaskSpec, TaskSuite
from .nav import NavContext, NavEnv
from .suites import SUITES, make_suite, read_suite_file, resolve_suite, write_suite_file
from .tmaze import (
    BLUE_TEXT,
    COMPOSITE_TEXT,
    RED_TEXT,
    CompositeTask,
    Phase,
    TMazeContext,
    TMazeEnv,
    TMazeGeometry,
    metadata_for_phase,
)
