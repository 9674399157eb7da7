"""Execution-guided program synthesis over a grid-transformation DSL."""

from gridsynth.catalog import Catalog, default_catalog
from gridsynth.codec import Vocabulary, decode_instruction, encode_instruction, encode_state
from gridsynth.dsl import (
    InstructionStep,
    Program,
    ProgramState,
    eliminate_dels,
    exec_step,
    format_program,
    parse_program,
    run_program,
)
from gridsynth.grid import Grid, attr, grids_equal
from gridsynth.guidance import (
    GuidanceContext,
    NoisyOracleModel,
    OracleModel,
    UniformModel,
    build_oracle,
    enumerate_steps,
)
from gridsynth.search import SearchConfig, SearchResult, greedy_rollout, tree_search
from gridsynth.tasks import ALL_TASKS, OOD_TASKS, TASKS_BY_ID, TRAIN_TASKS, sample_instance

__version__ = "0.1.0"

__all__ = [
    "ALL_TASKS",
    "Catalog",
    "Grid",
    "GuidanceContext",
    "InstructionStep",
    "NoisyOracleModel",
    "OOD_TASKS",
    "OracleModel",
    "Program",
    "ProgramState",
    "SearchConfig",
    "SearchResult",
    "TASKS_BY_ID",
    "TRAIN_TASKS",
    "UniformModel",
    "Vocabulary",
    "attr",
    "build_oracle",
    "decode_instruction",
    "default_catalog",
    "eliminate_dels",
    "encode_instruction",
    "encode_state",
    "enumerate_steps",
    "exec_step",
    "format_program",
    "greedy_rollout",
    "grids_equal",
    "parse_program",
    "run_program",
    "sample_instance",
    "tree_search",
]
