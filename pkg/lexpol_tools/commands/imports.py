import argparse
import dataclasses
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, ClassVar, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..agent import LexpolAgent, RunConfig, Schedule, load_config, run_soundness_suite, train
from ..envs import resolve_suite
from ..evaluation import TrajectoryWriter, compare, emit_dominance_map, evaluate, write_run_report
from ..utils.errors import ArgumentError, NumericError, exit_code_for, leaf_exceptions
from ..utils.exception_stack import ExceptionStack
