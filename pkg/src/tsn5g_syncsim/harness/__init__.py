"""Scenario runner, trace summaries and the command-line interface."""

from tsn5g_syncsim.harness.config import ConfigError, ScenarioConfig, load_config, parse_config
from tsn5g_syncsim.harness.scenarios import RunResult, run_scenario
from tsn5g_syncsim.harness.summary import MalformedTrace, RunSummary, compare, summarize, summarize_texts

__all__ = [
    "ConfigError",
    "MalformedTrace",
    "RunResult",
    "RunSummary",
    "ScenarioConfig",
    "compare",
    "load_config",
    "parse_config",
    "run_scenario",
    "summarize",
    "summarize_texts",
]
