"""Expression matrices and per-cell label files as TSV."""

from pathlib import Path
from typing import Dict, Mapping, Sequence, Union

import numpy as np
import pandas as pd

from grnformer.errors import ParseError
from grnformer.models import ExpressionMatrix
from grnformer.tables import first_duplicate, parse_floats, read_table, write_table

PathLike = Union[str, Path]

CELL_COLUMN = "cell"
CELL_TYPE_COLUMNS = ("cell", "cell_type")
GENE_LIST_COLUMNS = ("gene",)


def load_matrix(path: PathLike) -> ExpressionMatrix:
    """Read a ``cell<TAB>gene...`` matrix, one row per cell.

    Raises:
        FileNotFoundError: no file at ``path``
        ParseError: bad header, ragged rows, non-numeric or negative values, duplicate ids
    """
    table = read_table(path)
    header = table.attrs["header"]
    if not header or header[0] != CELL_COLUMN:
        raise ParseError(f"first header field must be '{CELL_COLUMN}'", str(path), 1)
    genes = header[1:]
    dup = first_duplicate(genes)
    if dup >= 0:
        raise ParseError(f"duplicate gene id '{genes[dup]}'", str(path), 1)
    cells = list(table[0])
    dup = first_duplicate(cells)
    if dup >= 0:
        raise ParseError(f"duplicate cell id '{cells[dup]}'", str(path), dup + 2)
    values = parse_floats(table.iloc[:, 1:].to_numpy(), path).reshape(len(cells), len(genes))
    negative = np.flatnonzero((values < 0).any(axis=1))
    if negative.size:
        raise ParseError("negative expression value", str(path), int(negative[0]) + 2)
    return ExpressionMatrix(values, tuple(cells), tuple(genes))


def save_matrix(matrix: ExpressionMatrix, path: PathLike) -> None:
    """Write ``matrix`` with 17 significant digits, so loading it back is exact."""
    frame = pd.DataFrame(matrix.values, columns=list(matrix.gene_ids))
    frame.insert(0, CELL_COLUMN, list(matrix.cell_ids), allow_duplicates=True)
    write_table(frame, path)


def load_cell_types(path: PathLike) -> Dict[str, str]:
    table = read_table(path, CELL_TYPE_COLUMNS)
    cells = list(table[0])
    dup = first_duplicate(cells)
    if dup >= 0:
        raise ParseError(f"duplicate cell id '{cells[dup]}'", str(path), dup + 2)
    return dict(zip(cells, table[1]))


def save_cell_types(cell_types: Mapping[str, str], path: PathLike) -> None:
    write_table(pd.DataFrame(list(cell_types.items()), columns=list(CELL_TYPE_COLUMNS)), path)


def load_gene_list(path: PathLike) -> list:
    return list(read_table(path, GENE_LIST_COLUMNS)[0])


def save_gene_list(genes: Sequence[str], path: PathLike) -> None:
    write_table(pd.DataFrame({"gene": list(genes)}), path)


__all__ = [
    "CELL_COLUMN",
    "load_matrix",
    "save_matrix",
    "load_cell_types",
    "save_cell_types",
    "load_gene_list",
    "save_gene_list",
]
