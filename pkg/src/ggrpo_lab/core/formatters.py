"""Response and file formatting: JSON for tool results, fixed-precision CSV for runs."""

import json
from pathlib import Path
from typing import Any, Dict, Optional

import polars as pl

FLOAT_FORMAT = ".17g"


def format_float(x: float) -> str:
    """17 significant digits, enough to round-trip any float64."""
    return format(float(x), FLOAT_FORMAT)


def format_json(data: Dict[str, Any]) -> str:
    """Format response as clean JSON."""
    return json.dumps(data, indent=2, default=str)


def format_result(value: Any, metadata: Optional[Dict[str, Any]] = None) -> str:
    """Format a single result with optional metadata."""
    result = {"result": value}

    if metadata:
        result.update(metadata)

    return format_json(result)


def frame_to_text(df: pl.DataFrame) -> pl.DataFrame:
    """Render every float column with FLOAT_FORMAT; nulls stay empty."""
    return df.with_columns(
        pl.col(pl.Float64).map_elements(format_float, return_dtype=pl.Utf8, skip_nulls=True)
    )


def write_csv(df: pl.DataFrame, path: Path) -> Path:
    """Write a frame as CSV with a header row, even when it has no rows."""
    frame_to_text(df).write_csv(path, include_header=True, null_value="")
    return path
