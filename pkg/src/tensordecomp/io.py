"""Text file formats: tensor files, sample files and JSON result documents.

Tensor file::

    # comment lines start with '#'
    tensor 3 3 4 2
    1 2 3 4 ... 24

The header gives the order and extents; the body lists the values with
the first index varying fastest.
"""
from __future__ import annotations

import json
import math
import re
from pathlib import Path

import numpy as np

from .core import DenseTensor, KruskalTensor
from .errors import ParseError
from .tucker import TuckerTensor

__all__ = [
    "read_tensor",
    "write_tensor",
    "format_tensor",
    "parse_tensor",
    "read_samples",
    "write_samples",
    "read_documents",
    "write_documents",
    "dump_result",
    "load_result",
    "kruskal_from_result",
    "tucker_from_result",
]

_SPLIT = re.compile(r"[,\s;]+")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def format_tensor(t: DenseTensor, per_line: int | None = None) -> str:
    per_line = per_line or t.shape[0]
    values = [_fmt(v) for v in t.flat]
    lines = [f"tensor {t.order} " + " ".join(str(s) for s in t.shape)]
    for lo in range(0, len(values), per_line):
        lines.append(" ".join(values[lo:lo + per_line]))
    return "\n".join(lines) + "\n"


def write_tensor(path, t: DenseTensor) -> None:
    Path(path).write_text(format_tensor(t))


def parse_tensor(text: str) -> DenseTensor:
    header = None
    header_line = 0
    values: list[float] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if header is None:
            if tokens[0] != "tensor":
                raise ParseError(f"expected header 'tensor <N> <I1> ... <IN>', got {line!r}", lineno)
            try:
                nums = [int(tok) for tok in tokens[1:]]
            except ValueError:
                raise ParseError(f"non-integer in header {line!r}", lineno) from None
            if not nums or nums[0] < 1 or len(nums) != nums[0] + 1 or min(nums[1:]) < 1:
                raise ParseError(f"malformed header {line!r}", lineno)
            header = tuple(nums[1:])
            header_line = lineno
            continue
        for tok in tokens:
            try:
                v = float(tok)
            except ValueError:
                raise ParseError(f"not a number: {tok!r}", lineno) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {tok!r}", lineno)
            values.append(v)
    if header is None:
        raise ParseError("missing 'tensor' header", 1)
    expected = math.prod(header)
    if len(values) != expected:
        raise ParseError(
            f"shape {header} needs {expected} values, found {len(values)}", header_line
        )
    return DenseTensor.from_flat(header, values)


def read_tensor(path) -> DenseTensor:
    return parse_tensor(Path(path).read_text())


def _data_lines(path):
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield lineno, [tok for tok in _SPLIT.split(line) if tok]


def _is_header(tokens):
    try:
        [float(t) for t in tokens]
    except ValueError:
        return True
    return False


def read_samples(path) -> np.ndarray:
    """Rectangular numeric sample matrix, one sample per row."""
    rows = []
    width = None
    first = True
    for lineno, tokens in _data_lines(path):
        if first and _is_header(tokens):
            first = False
            continue
        first = False
        try:
            row = [float(t) for t in tokens]
        except ValueError:
            raise ParseError("non-numeric sample value", lineno) from None
        if not all(math.isfinite(v) for v in row):
            raise ParseError("non-finite sample value", lineno)
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(f"row has {len(row)} values, expected {width}", lineno)
        rows.append(row)
    if not rows:
        raise ParseError("sample file has no data rows", 1)
    return np.array(rows, dtype=np.float64)


def write_samples(path, x, header: list[str] | None = None) -> None:
    x = np.asarray(x, dtype=np.float64)
    with open(path, "w") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        for row in x:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_documents(path, d: int | None = None):
    """Topic documents, one row of 1-based word indices per document.

    Returns ``(docs, d, rows)``: 0-based index arrays, the vocabulary size
    (``d`` if given, else the largest index seen) and the source line of
    each document. Rows with fewer than 3 words are rejected.
    """
    docs, lines = [], []
    first = True
    for lineno, tokens in _data_lines(path):
        if first and _is_header(tokens):
            first = False
            continue
        first = False
        try:
            words = [int(t) for t in tokens]
        except ValueError:
            raise ParseError("word indices must be integers", lineno) from None
        if len(words) < 3:
            raise ParseError(
                f"document row {len(docs) + 1} has {len(words)} words; at least 3 are needed", lineno
            )
        if min(words) < 1 or (d is not None and max(words) > d):
            raise ParseError(f"word index outside 1..{d if d else 'd'}", lineno)
        docs.append(np.array(words, dtype=np.int64) - 1)
        lines.append(lineno)
    if not docs:
        raise ParseError("document file has no rows", 1)
    vocab = d if d is not None else int(max(doc.max() for doc in docs)) + 1
    return docs, vocab, lines


def write_documents(path, words) -> None:
    with open(path, "w") as fh:
        for doc in words:
            fh.write(" ".join(str(int(w) + 1) for w in doc) + "\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v) or math.isinf(v):
            return None
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def dump_result(doc: dict) -> str:
    """Deterministic JSON text for a result document."""
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def load_result(path) -> dict:
    return json.loads(Path(path).read_text())


def kruskal_from_result(doc: dict) -> KruskalTensor:
    model = doc["model"]
    return KruskalTensor(model["weights"], [np.array(f) for f in model["factors"]])


def tucker_from_result(doc: dict) -> TuckerTensor:
    model = doc["model"]
    core = DenseTensor.from_flat(model["core_shape"], model["core"])
    return TuckerTensor(core, [np.array(f) for f in model["factors"]])
