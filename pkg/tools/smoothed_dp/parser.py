"""Reading and writing the CSV and JSON input formats."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import TextIO, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from .config import CSV_SEPARATOR, FLOAT_FORMAT, NODE_CAP
from .dag import Dag, ExpectedPath
from .errors import InputFileError
from .models import DagDocument, PotentialTensorDocument

logger = logging.getLogger(__name__)

Destination = Union[str, Path, TextIO]


def read_matrix_csv(path: Union[str, Path], header: bool = False) -> np.ndarray:
    """Read a numeric matrix, one row per line, comma separated.

    Raises:
        InputFileError: if the file is missing, ragged, or holds a
            non-numeric or non-finite entry; the message carries the
            1-based line number.
    """
    path = Path(path)
    skipped = 1 if header else 0
    try:
        frame = pd.read_csv(
            path,
            sep=CSV_SEPARATOR,
            header=None,
            skiprows=skipped,
            dtype=str,
            skip_blank_lines=False,
        )
    except FileNotFoundError:
        raise InputFileError("file not found", str(path)) from None
    except pd.errors.EmptyDataError:
        raise InputFileError("file has no data rows", str(path)) from None
    except pd.errors.ParserError as exc:
        raise InputFileError(f"malformed CSV ({exc})", str(path)) from None
    except OSError as exc:
        raise InputFileError(f"cannot read file ({exc.strerror})", str(path)) from None

    stripped = frame.apply(lambda column: column.map(lambda s: s.strip() if isinstance(s, str) else s))
    values = stripped.apply(pd.to_numeric, errors="coerce")
    bad = ~np.isfinite(values.to_numpy(dtype=float, na_value=np.nan))
    if bad.any():
        row, column = (int(k[0]) for k in np.nonzero(bad))
        raw = frame.iat[row, column]
        reason = "missing value" if pd.isna(raw) else f"not a finite number: {raw!r}"
        raise InputFileError(f"column {column + 1}: {reason}", str(path), row + 1 + skipped)

    matrix = values.to_numpy(dtype=float)
    logger.debug(f"read {matrix.shape[0]}x{matrix.shape[1]} matrix from {path}")
    return matrix


def write_matrix_csv(destination: Destination, matrix: np.ndarray) -> None:
    """Write a matrix with 17 significant digits, no header or index."""
    try:
        pd.DataFrame(np.atleast_2d(matrix)).to_csv(
            destination,
            sep=CSV_SEPARATOR,
            header=False,
            index=False,
            float_format=FLOAT_FORMAT,
        )
    except OSError as exc:
        raise InputFileError(f"cannot write file ({exc.strerror})", str(destination)) from None


def _read_text(path: Union[str, Path]) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InputFileError("file not found", str(path)) from None
    except OSError as exc:
        raise InputFileError(f"cannot read file ({exc.strerror})", str(path)) from None


def _first_error(exc: ValidationError) -> str:
    error = exc.errors()[0]
    location = ".".join(str(part) for part in error["loc"])
    return f"{location}: {error['msg']}" if location else error["msg"]


def read_dag_json(path: Union[str, Path], node_cap: int = NODE_CAP) -> Dag:
    """Load ``{"n_nodes", "edges": [[child, parent, weight], ...]}`` with 1-based nodes."""
    try:
        document = DagDocument.model_validate_json(_read_text(path))
    except ValidationError as exc:
        raise InputFileError(f"invalid DAG document ({_first_error(exc)})", str(path)) from None
    edges = [(child - 1, parent - 1, weight) for child, parent, weight in document.edges]
    return Dag.from_edges(document.n_nodes, edges, node_cap=node_cap)


def read_potentials_json(path: Union[str, Path]) -> np.ndarray:
    """Load a ``{"T", "S", "theta"}`` potential tensor."""
    try:
        document = PotentialTensorDocument.model_validate_json(_read_text(path))
    except ValidationError as exc:
        raise InputFileError(f"invalid potential tensor ({_first_error(exc)})", str(path)) from None
    return document.to_array()


def format_node_path(nodes: list[int]) -> str:
    """1-based node sequence joined by arrows."""
    return " -> ".join(str(node + 1) for node in nodes)


def expected_path_frame(dag: Dag, expected: ExpectedPath) -> pd.DataFrame:
    """Expected path as 1-based ``child, parent, probability`` rows."""
    return pd.DataFrame(
        {
            "child": dag.children + 1,
            "parent": dag.parents + 1,
            "probability": expected.edges,
        }
    )
