"""Matrix Market input and CSV output.

Supported Matrix Market headers::

    %%MatrixMarket matrix {coordinate|array} {real|integer|pattern} {general|symmetric}

``pattern`` is only valid with ``coordinate``.  Symmetric files are expanded
to general storage, duplicate coordinates summed and explicit zeros dropped.
Files ending in ``.gz`` are decompressed transparently.
"""
from __future__ import annotations

import csv
import gzip
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ParseError
from .matrix import RowMatrix

TRACE_HEADER = ["run", "method", "theta", "N", "seed", "k", "rel_error",
                "residual_norm", "elapsed_s"]
SUMMARY_HEADER = ["method", "theta", "N", "matrix", "trials", "median_final_error",
                  "median_iters", "median_cpu_s"]

#: name -> (rows, cols, density in percent) for the real-world benchmark set
BENCHMARK_MATRICES = {
    "ash958": (958, 292, 0.68),
    "ash219": (219, 85, 2.35),
    "abtaha1": (14596, 209, 1.68),
    "abtaha2": (37932, 331, 1.09),
}

#: directory searched by :func:`find_matrix` when no explicit directory is given
MTX_DIR_ENV = "NOISY_KACZMARZ_MTX_DIR"

_FORMATS = ("coordinate", "array")
_FIELDS = ("real", "integer", "pattern")
_SYMMETRIES = ("general", "symmetric")


@dataclass(frozen=True)
class MatrixMarketHeader:
    object: str
    format: str
    field: str
    symmetry: str


def _fmt(v) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    return "%.17g" % v


def _open_text(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8", newline=None)
    return open(path, "r", encoding="utf-8", newline=None)


def parse_header(line: str, path=None) -> MatrixMarketHeader:
    tokens = line.split()
    if not tokens or tokens[0].lower() != "%%matrixmarket":
        raise ParseError("missing %%MatrixMarket banner", 1, path)
    if len(tokens) != 5:
        raise ParseError(f"banner needs 4 tokens after %%MatrixMarket, got {len(tokens) - 1}",
                         1, path)
    obj, fmt, field, sym = (t.lower() for t in tokens[1:])
    if obj != "matrix":
        raise ParseError(f"unsupported object {tokens[1]!r}", 1, path)
    if fmt not in _FORMATS:
        raise ParseError(f"unsupported format {tokens[2]!r}", 1, path)
    if field not in _FIELDS:
        raise ParseError(f"unsupported field {tokens[3]!r}", 1, path)
    if sym not in _SYMMETRIES:
        raise ParseError(f"unsupported symmetry {tokens[4]!r}", 1, path)
    if fmt == "array" and field == "pattern":
        raise ParseError("pattern field is not valid for array format", 1, path)
    return MatrixMarketHeader(obj, fmt, field, sym)


def _int(tok, lineno, path, what):
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"non-integer {what} {tok!r}", lineno, path) from None


def _float(tok, lineno, path):
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"non-numeric value {tok!r}", lineno, path) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value {tok!r}", lineno, path)
    return v


def load_matrix_market(path, allow_zero_rows: bool = True) -> RowMatrix:
    """Read a Matrix Market file into a CSR :class:`RowMatrix`.

    Zero rows are kept by default so any valid file loads; solvers reject
    them later.

    Raises
    ------
    ParseError
        Missing file, bad banner or size line, out-of-range index,
        non-numeric value or wrong entry count, with the offending line.
    """
    path = Path(path)
    if not path.is_file():
        raise ParseError("no such file", None, str(path))
    spath = str(path)
    try:
        with _open_text(path) as fh:
            lines = fh.read().splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot read: {exc}", None, spath) from exc
    if not lines:
        raise ParseError("empty file", 1, spath)
    header = parse_header(lines[0], spath)

    body = ((no, ln) for no, ln in enumerate(lines[1:], start=2)
            if ln.strip() and not ln.lstrip().startswith("%"))
    try:
        size_no, size_line = next(body)
    except StopIteration:
        raise ParseError("missing size line", len(lines), spath) from None
    dims = size_line.split()
    want = 3 if header.format == "coordinate" else 2
    if len(dims) != want:
        raise ParseError(f"size line needs {want} integers", size_no, spath)
    dims = [_int(t, size_no, spath, "size") for t in dims]
    if any(d < 0 for d in dims) or dims[0] == 0 or dims[1] == 0:
        raise ParseError("dimensions must be positive", size_no, spath)
    m, n = dims[0], dims[1]
    symmetric = header.symmetry == "symmetric"
    if symmetric and m != n:
        raise ParseError("symmetric matrix must be square", size_no, spath)

    if header.format == "coordinate":
        rows, cols, vals = _read_coordinate(body, m, n, dims[2], header, spath, len(lines))
    else:
        rows, cols, vals = _read_array(body, m, n, symmetric, spath, len(lines))

    if symmetric:
        off = rows != cols
        rows, cols, vals = (np.concatenate([rows, cols[off]]),
                            np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, vals[off]]))
    csr = sp.coo_matrix((vals, (rows, cols)), shape=(m, n)).tocsr()
    csr.sum_duplicates()
    csr.eliminate_zeros()
    csr.sort_indices()
    return RowMatrix.from_scipy(csr, allow_zero_rows=allow_zero_rows)


def _read_coordinate(body, m, n, nnz, header, path, nlines):
    pattern = header.field == "pattern"
    integer = header.field == "integer"
    width = 2 if pattern else 3
    rows = np.empty(nnz, dtype=np.intp)
    cols = np.empty(nnz, dtype=np.intp)
    vals = np.ones(nnz)
    count = 0
    for no, ln in body:
        if count == nnz:
            raise ParseError(f"more than the declared {nnz} entries", no, path)
        tok = ln.split()
        if len(tok) != width:
            raise ParseError(f"expected {width} fields, got {len(tok)}", no, path)
        i = _int(tok[0], no, path, "row index")
        j = _int(tok[1], no, path, "column index")
        if not (1 <= i <= m and 1 <= j <= n):
            raise ParseError(f"index ({i}, {j}) outside {m}x{n}", no, path)
        if header.symmetry == "symmetric" and j > i:
            raise ParseError(f"symmetric file has upper-triangle entry ({i}, {j})", no, path)
        rows[count] = i - 1
        cols[count] = j - 1
        if not pattern:
            vals[count] = (_int(tok[2], no, path, "value") if integer
                           else _float(tok[2], no, path))
        count += 1
    if count != nnz:
        raise ParseError(f"declared {nnz} entries, found {count}", nlines, path)
    return rows, cols, vals


def _read_array(body, m, n, symmetric, path, nlines):
    # column-major; symmetric files store the lower triangle only
    if symmetric:
        positions = [(i, j) for j in range(n) for i in range(j, m)]
    else:
        positions = [(i, j) for j in range(n) for i in range(m)]
    total = len(positions)
    vals = np.empty(total)
    count = 0
    for no, ln in body:
        tok = ln.split()
        if len(tok) != 1:
            raise ParseError(f"expected 1 field, got {len(tok)}", no, path)
        if count == total:
            raise ParseError(f"more than the expected {total} values", no, path)
        vals[count] = _float(tok[0], no, path)
        count += 1
    if count != total:
        raise ParseError(f"expected {total} values, found {count}", nlines, path)
    idx = np.array(positions, dtype=np.intp).reshape(-1, 2)
    return idx[:, 0], idx[:, 1], vals


def density_percent(A: RowMatrix) -> float:
    """Stored nonzeros as a percentage of ``m * n``."""
    nnz = A.nnz if A.is_sparse else int(np.count_nonzero(A.dense))
    return 100.0 * nnz / (A.m * A.n)


def find_matrix(name: str, directories: Optional[Sequence] = None) -> Optional[Path]:
    """Locate ``name.mtx`` (or ``.mtx.gz``, or ``name/name.mtx``) on disk.

    Searches ``directories`` or, when omitted, the directory named by the
    ``NOISY_KACZMARZ_MTX_DIR`` environment variable.  Returns None if absent.
    """
    if directories is None:
        env = os.environ.get(MTX_DIR_ENV)
        directories = [env] if env else []
    for d in directories:
        d = Path(d)
        for cand in (d / f"{name}.mtx", d / f"{name}.mtx.gz",
                     d / name / f"{name}.mtx", d / name / f"{name}.mtx.gz"):
            if cand.is_file():
                return cand
    return None


class TraceEntry(NamedTuple):
    """One solver trace with the metadata written beside it."""

    run: str
    method: str
    theta: float
    N: int
    seed: int
    trace: object


class TraceRow(NamedTuple):
    run: str
    method: str
    theta: float
    N: int
    seed: int
    k: int
    rel_error: float
    residual_norm: float
    elapsed_s: float


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_trace_csv(entries: Iterable[TraceEntry], path, timing: bool = True) -> None:
    """One row per recorded iterate; ``timing=False`` leaves ``elapsed_s`` empty."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(TRACE_HEADER)
        for e in entries:
            tr = e.trace
            theta = _fmt(e.theta)
            for k in range(len(tr.relative_error)):
                w.writerow([e.run, e.method, theta, int(e.N), int(e.seed), k,
                            _fmt(tr.relative_error[k]), _fmt(tr.residual_norm[k]),
                            _fmt(tr.elapsed_seconds[k]) if timing else ""])


def _num(s: str) -> float:
    return math.nan if s == "" else float(s)


def read_trace_csv(path) -> list[TraceRow]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRACE_HEADER:
            raise ParseError(f"unexpected trace header {header!r}", 1, str(path))
        out = []
        for no, row in enumerate(reader, start=2):
            if len(row) != len(TRACE_HEADER):
                raise ParseError(f"expected {len(TRACE_HEADER)} fields", no, str(path))
            try:
                out.append(TraceRow(row[0], row[1], float(row[2]), int(row[3]), int(row[4]),
                                    int(row[5]), _num(row[6]), _num(row[7]), _num(row[8])))
            except ValueError as exc:
                raise ParseError(str(exc), no, str(path)) from None
    return out


def write_summary_csv(summaries, path, timing: bool = True) -> None:
    """One row per configuration summary (see ``harness.TrialSummary``)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(SUMMARY_HEADER)
        for s in summaries:
            w.writerow([s.method, _fmt(s.theta), int(s.N), s.matrix, int(s.trials),
                        _fmt(s.median_final_error), _fmt(s.median_iterations),
                        _fmt(s.median_cpu_seconds) if timing else ""])


def read_summary_csv(path) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SUMMARY_HEADER:
            raise ParseError(f"unexpected summary header {reader.fieldnames!r}", 1, str(path))
        out = []
        for row in reader:
            out.append({
                "method": row["method"], "theta": float(row["theta"]), "N": int(row["N"]),
                "matrix": row["matrix"], "trials": int(row["trials"]),
                "median_final_error": _num(row["median_final_error"]),
                "median_iters": _num(row["median_iters"]),
                "median_cpu_s": _num(row["median_cpu_s"]),
            })
    return out


def write_bounds_csv(reports, path, labels: Optional[Sequence[str]] = None) -> None:
    """Bound reports, one per row, columns named after the report fields."""
    from .bounds import BoundReport
    names = BoundReport.field_names()
    reports = list(reports)
    labels = list(labels) if labels is not None else [str(i) for i in range(len(reports))]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["label"] + names)
        for label, rep in zip(labels, reports):
            d = rep.as_dict()
            w.writerow([label] + [
                int(d[k]) if isinstance(d[k], (bool, np.bool_)) or k == "N" else _fmt(d[k])
                for k in names])
