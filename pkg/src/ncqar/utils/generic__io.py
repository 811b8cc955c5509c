import json
import typing
from pathlib import Path

import numpy as np
import pandas as pd

from ..errors import DataError

__all__ = (
    "FLOAT_FORMAT",
    "annualized_log_diff",
    "read_column",
    "write_series_csv",
    "write_rows_csv",
    "to_jsonable",
    "write_json",
)

FLOAT_FORMAT = "%.17g"


def annualized_log_diff(prices: typing.Sequence[float], first_row: int = 1) -> np.ndarray:
    """
    400 * (ln P_t - ln P_{t-1}), one value shorter than the input.

    :param first_row: File row number of ``prices[0]``, used in error messages
    :raises DataError: On a non-positive price, naming its row
    """
    values = np.asarray(prices, dtype=float)
    bad = np.flatnonzero(~(values > 0.0))
    if bad.size:
        raise DataError(
            f"price {values[bad[0]]!r} is not positive; log transform undefined", row=first_row + int(bad[0])
        )
    if values.size < 2:
        raise DataError("need at least two prices to difference")
    return 400.0 * np.diff(np.log(values))


def read_column(path: Path, column: typing.Union[str, int]) -> typing.Tuple[np.ndarray, int]:
    """
    Reads one decimal column of a UTF-8, comma-separated file with a header row.

    :param column: Header name, or a 0-based column index
    :return: The values and the file row number of the first value (the header is row 1)
    :raises DataError: If the file or column is missing, or a cell does not parse as a decimal
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path} does not exist")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=True, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"{path} is not a readable CSV file: {e}") from None

    if isinstance(column, str) and column not in frame.columns and column.isdigit():
        column = int(column)
    if isinstance(column, int):
        if not 0 <= column < frame.shape[1]:
            raise DataError(f"{path} has {frame.shape[1]} columns; index {column} is out of range")
        cells = frame.iloc[:, column]
    elif column in frame.columns:
        cells = frame[column]
    else:
        raise DataError(f"{path} has no column {column!r} (columns: {', '.join(map(str, frame.columns))})")

    values = np.empty(len(cells))
    for i, cell in enumerate(cells):
        try:
            values[i] = float(cell.strip())
        except ValueError:
            raise DataError(f"{cell!r} is not a decimal number", row=i + 2) from None
        if not np.isfinite(values[i]):
            raise DataError(f"{cell!r} is not finite", row=i + 2)
    return values, 2


def write_series_csv(path: typing.Optional[Path], series: typing.Sequence[float]) -> typing.Optional[str]:
    """``t,value`` with t starting at 1 and values at 17 significant digits. Returns the text when path is None."""
    frame = pd.DataFrame({"t": np.arange(1, len(series) + 1), "value": np.asarray(series, dtype=float)})
    return frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def write_rows_csv(
    path: typing.Optional[Path], header: typing.Sequence[str], rows: typing.Iterable[typing.Sequence]
) -> typing.Optional[str]:
    frame = pd.DataFrame(list(rows), columns=list(header))
    return frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def to_jsonable(value: typing.Any) -> typing.Any:
    """numpy scalars/arrays, enums, paths and tuples to plain JSON types."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, "value") and isinstance(getattr(value, "value"), (str, int)):
        return value.value
    return value


def write_json(path: typing.Optional[Path], data: dict) -> str:
    """Stable-key, indented UTF-8 JSON. Writes to ``path`` when given; always returns the text."""
    text = json.dumps(to_jsonable(data), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=True) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
