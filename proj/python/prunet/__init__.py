"""Python bindings for the PRU / LSTM / GRU library."""

from ._core import (
    ConfigError,
    DataError,
    Model,
    NumericError,
    PruError,
    ShapeError,
    count_params,
    gen_adding,
    gen_memorization,
    gradcheck_suite,
    lemma1_suite,
    load_config,
    match_dim_for_params,
    run_config,
    sweep,
    timing_report,
)

CELLS = ("PRU", "LSTM", "GRU")

__all__ = [
    "CELLS",
    "ConfigError",
    "DataError",
    "Model",
    "NumericError",
    "PruError",
    "ShapeError",
    "count_params",
    "gen_adding",
    "gen_memorization",
    "gradcheck_suite",
    "lemma1_suite",
    "load_config",
    "match_dim_for_params",
    "run_config",
    "sweep",
    "timing_report",
]
