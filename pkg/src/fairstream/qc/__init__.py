from . import flags
from .dsl import QcConfig, parse_config, canonical_kwargs_string, config_hash_of
from .errors import (
    BadArgument,
    ConfigSyntaxError,
    ExprSyntaxError,
    QcError,
    UndecodableLabel,
    UnknownFunction,
    UnknownScheme,
    UnknownVariable,
)
from .functions import CATALOG, FlagAssignment, Series
from .pipeline import (
    QcRunReport,
    RunResult,
    SeriesFrame,
    run_on_store,
    run_pipeline,
)

__all__ = [
    "flags", "QcConfig", "parse_config", "canonical_kwargs_string",
    "config_hash_of", "CATALOG", "FlagAssignment", "Series", "SeriesFrame",
    "QcRunReport", "RunResult", "run_on_store", "run_pipeline",
    "QcError", "ConfigSyntaxError", "UnknownFunction", "BadArgument",
    "ExprSyntaxError", "UnknownVariable", "UnknownScheme", "UndecodableLabel",
]
