from .config import ExperimentConfig, FlowSpec, load_config, parse_config
from .reports import CSV_COLUMNS, TrialReport, read_trials_csv, write_trials_csv
from .snapshots import read_snapshot_file, write_snapshot_file

__all__ = [
    "ExperimentConfig", "FlowSpec", "load_config", "parse_config",
    "CSV_COLUMNS", "TrialReport", "read_trials_csv", "write_trials_csv",
    "read_snapshot_file", "write_snapshot_file",
]
