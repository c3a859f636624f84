"""Tab-separated text tables with line-numbered parse errors."""

import re
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
import pandas as pd

from grnformer.errors import ParseError

PathLike = Union[str, Path]

FLOAT_FORMAT = "%.17g"

_LINE_PATTERN = re.compile(r"line (\d+)")


def read_table(path: PathLike, columns: Sequence[str] = ()) -> pd.DataFrame:
    """Read a TSV file into a frame of strings.

    The header row is read as data so duplicated column names survive (pandas
    would otherwise rename them). Row ``i`` of the returned frame came from
    file line ``i + 2``.

    Args:
        path: file to read
        columns: required header, checked exactly when non-empty

    Raises:
        FileNotFoundError: the file does not exist
        ParseError: empty file, ragged rows, or a header mismatch
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"file not found: {path}")
    try:
        raw = pd.read_csv(
            path, sep="\t", header=None, dtype=str, keep_default_na=False,
            na_filter=False, lineterminator="\n", quoting=3,
        )
    except pd.errors.EmptyDataError:
        raise ParseError("file is empty", str(path), 1) from None
    except pd.errors.ParserError as e:
        match = _LINE_PATTERN.search(str(e))
        line = int(match.group(1)) if match else None
        raise ParseError(f"ragged row ({e})", str(path), line) from None

    header = list(raw.iloc[0])
    if columns and header != list(columns):
        raise ParseError(f"expected header {list(columns)}, got {header}", str(path), 1)
    body = raw.iloc[1:].reset_index(drop=True)
    if len(body):
        short = (body.isna() | (body == "")).any(axis=1).to_numpy()
        if short.any():
            row = int(np.flatnonzero(short)[0])
            raise ParseError(f"ragged row: expected {len(header)} non-empty fields", str(path), row + 2)
    body.columns = range(len(header))
    body.attrs["header"] = header
    return body


def parse_floats(values: np.ndarray, path: PathLike, first_line: int = 2) -> np.ndarray:
    """Convert a 2-D array of strings to float64, exactly.

    Raises:
        ParseError: a field is not a finite number (reports its line)
    """
    try:
        parsed = np.array(values, dtype=np.float64)
    except ValueError:
        parsed = None
    if parsed is not None and np.all(np.isfinite(parsed)):
        return parsed
    for r, row in enumerate(values):
        for field in row:
            try:
                number = float(field)
            except ValueError:
                raise ParseError(f"non-numeric value '{field}'", str(path), first_line + r) from None
            if not np.isfinite(number):
                raise ParseError(f"non-finite value '{field}'", str(path), first_line + r)
    raise ParseError("unparseable numeric block", str(path))


def parse_ints(column: pd.Series, path: PathLike, name: str) -> List[int]:
    out = []
    for r, field in enumerate(column):
        try:
            out.append(int(field))
        except ValueError:
            raise ParseError(f"{name} must be an integer, got '{field}'", str(path), r + 2) from None
    return out


def first_duplicate(values: Sequence[str]) -> int:
    """Position of the first repeated entry, or -1."""
    seen = set()
    for i, value in enumerate(values):
        if value in seen:
            return i
        seen.add(value)
    return -1


def write_table(frame: pd.DataFrame, path: PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, sep="\t", index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


__all__ = ["FLOAT_FORMAT", "read_table", "parse_floats", "parse_ints", "first_duplicate", "write_table"]
