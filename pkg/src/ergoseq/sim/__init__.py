"""Inspection simulation: scenarios, traversal policies and the trial runner."""
from .policies import Policy, TrialRecord, bce_loss, run_policy_trial
from .runner import format_summary, run_trial, run_trials, summarize, write_trials_csv
from .scenario import ScenarioConfig, Scenario, generate_scenario, observe_node

__all__ = ["Policy", "TrialRecord", "bce_loss", "run_policy_trial", "run_trial", "run_trials",
           "summarize", "write_trials_csv", "format_summary", "ScenarioConfig", "Scenario", "generate_scenario", "observe_node"]
