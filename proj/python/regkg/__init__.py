"""Subgraph retrieval and evidence reorganization for KGQA."""

from ._core import (
    ConfigError,
    Graph,
    LookupError,
    MissingArtifact,
    RegError,
    estimate_recovery_rounds,
    evaluate,
    extract_answers,
    hypergeometric_tail,
    mock_complete,
    reward_from_count,
    run_stage,
    run_subset_search,
    stage_names,
)


def run_pipeline(config, work_dir=None, stages=None):
    """Runs the given stages (default: ingest through evaluate) and returns the joined log."""
    names = stages or [s for s in stage_names() if s != "simulate"]
    return "".join(run_stage(s, config, work_dir) for s in names)


__all__ = [
    "ConfigError",
    "Graph",
    "LookupError",
    "MissingArtifact",
    "RegError",
    "estimate_recovery_rounds",
    "evaluate",
    "extract_answers",
    "hypergeometric_tail",
    "mock_complete",
    "reward_from_count",
    "run_pipeline",
    "run_stage",
    "run_subset_search",
    "stage_names",
]
