from .query import (
    QueryParseError,
    StaQuery,
    UnsupportedOption,
    parse_query,
)
from .service import StaService

__all__ = ["parse_query", "StaQuery", "QueryParseError", "UnsupportedOption",
           "StaService"]
