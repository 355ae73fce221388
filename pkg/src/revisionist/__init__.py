"""Simulating space-starved shared-memory protocols with an augmented snapshot.

The package models protocols over an m-component snapshot, implements the
augmented snapshot on top of a single-writer snapshot, checks its traces for
linearizability, runs covering and direct simulators that revise the past of
their simulated processes, rebuilds and replays the simulated execution, and
turns nondeterministic solo-terminating machines into obstruction-free ones.
"""

from __future__ import annotations

from .augsnap import AugmentedSnapshot, get_view, new_timestamp
from .bounds import a, b, b_closed, b_solved, eps_bound, kset_bound, step_bound, xof_bound
from .engine import RevisionRecord, SimulationRun, SimulationSetup, simulate
from .errors import RevisionistError
from .lincheck import assign_points, brute_force_linearizable, check_all
from .model import (SCAN, ColorlessTask, Configuration, Event, ExecutionRecord, Output, ProtocolSpec, Scan,
                    Update, apply_step, check_x_of, run_schedule, validate_task)
from .ndst import NDMachine, derive, solo_path_table, verify_of
from .reconstruct import rebuild_and_check
from .trace import YIELD, Trace
from .zoo import REGISTRY, ZooEntry

__version__ = "0.1.0"

__all__ = [
    "SCAN", "YIELD", "AugmentedSnapshot", "ColorlessTask", "Configuration", "Event", "ExecutionRecord",
    "NDMachine", "Output", "ProtocolSpec", "REGISTRY", "RevisionRecord", "RevisionistError", "Scan",
    "SimulationRun", "SimulationSetup", "Trace", "Update", "ZooEntry", "a", "apply_step", "assign_points",
    "b", "b_closed", "b_solved", "brute_force_linearizable", "check_all", "check_x_of", "derive",
    "eps_bound", "get_view", "kset_bound", "new_timestamp", "rebuild_and_check", "run_schedule",
    "simulate", "solo_path_table", "step_bound", "validate_task", "verify_of", "xof_bound",
]
