from pathlib import Path

import numpy as np
import pytest

from optsub.errors import EmptyPool, ParseError, SchemaError
from optsub.io import CsvStream, ingest_csv, write_csv
from optsub.logistic import BinaryDataset
from optsub.survival import fit_cox

GOLDEN = Path(__file__).parent / "data" / "golden_survival.csv"


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_golden_file_round_trip_is_field_exact(tmp_path):
    d = ingest_csv(GOLDEN, "survival")
    assert d.n == 10 and d.names == ("age", "dose")
    assert d.status.tolist() == [1, 0, 1, 0, 0, 1, 0, 1, 0, 0]
    out = tmp_path / "copy.csv"
    write_csv(d, out)
    assert out.read_text() == GOLDEN.read_text()


def test_binary_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    d = BinaryDataset(rng.integers(0, 2, 25), rng.normal(size=(25, 3)), names=("a", "b", "c"))
    out = tmp_path / "b.csv"
    write_csv(d, out)
    back = ingest_csv(out, "binary")
    assert np.array_equal(back.x, d.x) and np.array_equal(back.y, d.y)


def test_header_only_gives_empty_dataset(tmp_path):
    d = ingest_csv(write(tmp_path, "time,status,x1\n"), "survival")
    assert d.n == 0
    with pytest.raises(Exception):
        fit_cox(d)
    assert ingest_csv(write(tmp_path, "y,x1,x2\n", "b.csv"), "binary").n == 0


def test_bad_status_reports_line(tmp_path):
    p = write(tmp_path, "time,status,x1\n1.0,0,0.5\n2.0,1,0.1\n3.0,2,0.2\n")
    with pytest.raises(ParseError) as info:
        ingest_csv(p, "survival")
    assert info.value.line == 4


def test_line_numbers_span_chunks(tmp_path):
    rows = "".join(f"{i + 1}.0,0,0.5\n" for i in range(9)) + "10.0,1,\n"
    with pytest.raises(ParseError) as info:
        ingest_csv(write(tmp_path, "time,status,x1\n" + rows), "survival", chunk_rows=4)
    assert info.value.line == 11


def test_non_numeric_and_entry_order(tmp_path):
    with pytest.raises(ParseError) as info:
        ingest_csv(write(tmp_path, "y,x1\n1,0.5\n0,abc\n"), "binary")
    assert info.value.line == 3
    with pytest.raises(ParseError) as info:
        ingest_csv(write(tmp_path, "entry,time,status,x1\n2.0,1.0,1,0.5\n", "e.csv"), "survival")
    assert info.value.line == 2


def test_schema_errors(tmp_path):
    with pytest.raises(SchemaError):
        ingest_csv(write(tmp_path, "time,x1\n1.0,0.5\n"), "survival")
    with pytest.raises(SchemaError):
        ingest_csv(write(tmp_path, "time,status\n1.0,1\n", "n.csv"), "survival")
    with pytest.raises(SchemaError):
        ingest_csv(write(tmp_path, "y,x1,x1\n1,0,0\n", "dup.csv"), "binary")
    with pytest.raises(SchemaError):
        ingest_csv(write(tmp_path, "", "empty.csv"), "binary")
    with pytest.raises(SchemaError):
        ingest_csv(GOLDEN, "poisson")
    with pytest.raises(FileNotFoundError):
        ingest_csv(tmp_path / "missing.csv", "binary")


def test_stream_replays_identical_batches():
    s = ingest_csv(GOLDEN, "survival", chunk_rows=3, stream=True)
    assert isinstance(s, CsvStream) and s.names == ("age", "dose")
    first = [b.copy() for b in s]
    assert [b.shape[0] for b in first] == [3, 3, 3, 1]
    assert all(np.array_equal(a, b) for a, b in zip(first, s))
    whole = ingest_csv(GOLDEN, "survival")
    np.testing.assert_array_equal(np.vstack(first)[:, 3:], whole.x)
