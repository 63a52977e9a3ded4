"""CSV ingestion (in memory or as a re-iterable batch stream) and CSV writing.

Schemas
-------
survival : ``entry`` (optional), ``time``, ``status``, covariates...
binary   : ``y``, covariates...

Every non-key column is a covariate, in file order. Line numbers count the
header as line 1.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
import pandas as pd

from .errors import ParseError, SchemaError
from .logistic import BinaryDataset
from .survival import SurvivalDataset

SCHEMAS = ("survival", "binary")
DEFAULT_CHUNK_ROWS = 1_000_000


@dataclass(frozen=True)
class Layout:
    schema: str
    header: tuple
    has_entry: bool
    covariates: tuple

    @property
    def key_columns(self) -> tuple:
        if self.schema == "binary":
            return ("y",)
        return ("entry", "time", "status") if self.has_entry else ("time", "status")

    @property
    def width(self) -> int:
        """Columns of a canonical batch: ``[entry, time, status, x...]`` or ``[y, x...]``."""
        return (3 if self.schema == "survival" else 1) + len(self.covariates)


def read_layout(path, schema: str) -> Layout:
    if schema not in SCHEMAS:
        raise SchemaError(f"schema must be one of {SCHEMAS}")
    with open(path, newline="") as fh:
        header = next(csv.reader(fh), None)
    if not header:
        raise SchemaError("missing header row")
    header = tuple(h.strip() for h in header)
    if len(set(header)) != len(header):
        raise SchemaError("duplicate column names")
    if schema == "survival":
        for col in ("time", "status"):
            if col not in header:
                raise SchemaError(f"survival schema needs a '{col}' column")
        has_entry = "entry" in header
        keys = {"entry", "time", "status"}
    else:
        if "y" not in header:
            raise SchemaError("binary schema needs a 'y' column")
        has_entry = False
        keys = {"y"}
    covs = tuple(h for h in header if h not in keys)
    if not covs:
        raise SchemaError("no covariate columns")
    return Layout(schema, header, has_entry, covs)


def _locate_bad_field(path, first_line: int, width: int) -> ParseError:
    with open(path, newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if line_no < first_line:
                continue
            if len(row) != width:
                return ParseError(f"expected {width} fields, found {len(row)}", line_no)
            for field in row:
                try:
                    float(field)
                except ValueError:
                    return ParseError(f"non-numeric value {field!r}", line_no)
    return ParseError("unparseable row", None)


def _canonical(frame: pd.DataFrame, layout: Layout) -> np.ndarray:
    n = len(frame)
    out = np.empty((n, layout.width))
    if layout.schema == "survival":
        out[:, 0] = frame["entry"].to_numpy() if layout.has_entry else 0.0
        out[:, 1] = frame["time"].to_numpy()
        out[:, 2] = frame["status"].to_numpy()
        out[:, 3:] = frame[list(layout.covariates)].to_numpy()
    else:
        out[:, 0] = frame["y"].to_numpy()
        out[:, 1:] = frame[list(layout.covariates)].to_numpy()
    return out


def _validate(block: np.ndarray, layout: Layout, first_line: int) -> None:
    def fail(mask, message):
        bad = np.flatnonzero(mask)
        if bad.size:
            raise ParseError(message, first_line + int(bad[0]))

    fail(np.any(np.isnan(block), axis=1), "missing value")
    fail(np.any(~np.isfinite(block), axis=1), "non-finite value")
    if layout.schema == "survival":
        fail((block[:, 2] != 0) & (block[:, 2] != 1), "status must be 0 or 1")
        fail(block[:, 1] <= block[:, 0], "time must exceed entry")
    else:
        fail((block[:, 0] != 0) & (block[:, 0] != 1), "y must be 0 or 1")


_LINE_IN_MESSAGE = re.compile(r"line (\d+)")


def iter_batches(path, layout: Layout, chunk_rows: int = DEFAULT_CHUNK_ROWS) -> Iterator[np.ndarray]:
    """Validated canonical blocks of at most ``chunk_rows`` rows."""
    if chunk_rows < 1:
        raise ValueError("chunk_rows must be positive")
    next_line = 2
    reader = pd.read_csv(
        path,
        dtype=np.float64,
        chunksize=chunk_rows,
        skipinitialspace=True,
        skip_blank_lines=False,
        engine="c",
        float_precision="round_trip",
    )
    try:
        for frame in reader:
            block = _canonical(frame, layout)
            _validate(block, layout, next_line)
            next_line += len(frame)
            yield block
    except pd.errors.ParserError as exc:
        m = _LINE_IN_MESSAGE.search(str(exc))
        raise ParseError(f"malformed row ({exc})", int(m.group(1)) if m else None) from exc
    except ValueError as exc:
        raise _locate_bad_field(path, next_line, len(layout.header)) from exc
    finally:
        reader.close()


class CsvStream:
    """A re-iterable stream of canonical batches over one CSV file."""

    def __init__(self, path, schema: str, chunk_rows: int = DEFAULT_CHUNK_ROWS):
        self.path = Path(path)
        self.layout = read_layout(path, schema)
        self.chunk_rows = int(chunk_rows)

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter_batches(self.path, self.layout, self.chunk_rows)

    @property
    def names(self) -> tuple:
        return self.layout.covariates


def to_dataset(block: np.ndarray, layout: Layout):
    names = layout.covariates
    if layout.schema == "survival":
        return SurvivalDataset(block[:, 1], block[:, 2], block[:, 3:], entry=block[:, 0], names=names)
    return BinaryDataset(block[:, 0], block[:, 1:], names=names)


def ingest_csv(path, schema: str, chunk_rows: int | None = None, stream: bool = False):
    """Load a CSV as a dataset, or as a :class:`CsvStream` when ``stream`` is true."""
    if stream:
        return CsvStream(path, schema, chunk_rows or DEFAULT_CHUNK_ROWS)
    layout = read_layout(path, schema)
    blocks = list(iter_batches(path, layout, chunk_rows or DEFAULT_CHUNK_ROWS))
    block = np.vstack(blocks) if blocks else np.empty((0, layout.width))
    return to_dataset(block, layout)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_csv(data, path, with_entry: bool | None = None) -> None:
    """Write a dataset in the ingestion schema; floats use shortest round-trip form."""
    names = data.names or tuple(f"x{j + 1}" for j in range(data.x.shape[1] - (1 if isinstance(data, BinaryDataset) else 0)))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if isinstance(data, SurvivalDataset):
            entry = with_entry if with_entry is not None else bool(np.any(data.entry != 0))
            w.writerow((("entry",) if entry else ()) + ("time", "status") + tuple(names))
            for i in range(data.n):
                head = (_fmt(data.entry[i]),) if entry else ()
                w.writerow(head + (_fmt(data.exit[i]), str(int(data.status[i]))) + tuple(_fmt(v) for v in data.x[i]))
        else:
            w.writerow(("y",) + tuple(names))
            for i in range(data.n):
                w.writerow((str(int(data.y[i])),) + tuple(_fmt(v) for v in data.x[i, 1:]))


def write_array_csv(path, header, rows, fmt: str = "%.10g", append: bool = False) -> None:
    """Fast writer for large numeric blocks (used for synthetic files)."""
    with open(path, "a" if append else "w") as fh:
        if not append:
            fh.write(",".join(header) + "\n")
        np.savetxt(fh, np.asarray(rows), fmt=fmt, delimiter=",")
