"""Text file formats: ``.ct3`` tensors, ``.cmx`` matrices, ``.cpj`` models.

All floats are written with 17 significant digits so a write/read round trip
reproduces double precision values exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .tensor_core import CpModel, DimensionError, Tensor3


class FormatError(ValueError):
    """Raised on malformed input files."""


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _pair_lines(values: np.ndarray) -> list[str]:
    return [f"{_fmt(z.real)} {_fmt(z.imag)}" for z in values]


def _parse_pairs(lines: list[str], count: int, what: str) -> np.ndarray:
    if len(lines) < count:
        raise FormatError(f"{what}: expected {count} entries, found {len(lines)}")
    out = np.empty(count, dtype=np.complex128)
    for idx, line in enumerate(lines[:count]):
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"{what}: entry {idx} is not 're im': {line!r}")
        try:
            out[idx] = complex(float(parts[0]), float(parts[1]))
        except ValueError as exc:
            raise FormatError(f"{what}: entry {idx}: {exc}") from None
    if any(line.strip() for line in lines[count:]):
        raise FormatError(f"{what}: trailing data after {count} entries")
    return out


def _read_header(path, magic: str, nfields: int):
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if len(lines) < 2 or lines[0].strip() != f"{magic} 1":
        raise FormatError(f"{path}: missing '{magic} 1' header")
    try:
        shape = tuple(int(tok) for tok in lines[1].split())
    except ValueError:
        raise FormatError(f"{path}: bad dimension line {lines[1]!r}") from None
    if len(shape) != nfields or min(shape) < 1:
        raise FormatError(f"{path}: bad dimension line {lines[1]!r}")
    return shape, lines[2:]


def format_ct3(A: Tensor3) -> str:
    l, m, n = A.dims
    lines = ["CT3 1", f"{l} {m} {n}", *_pair_lines(A.data.ravel(order="C"))]
    return "\n".join(lines) + "\n"


def write_ct3(path, A: Tensor3) -> None:
    Path(path).write_text(format_ct3(A), encoding="utf-8", newline="\n")


def read_ct3(path) -> Tensor3:
    dims, body = _read_header(path, "CT3", 3)
    values = _parse_pairs(body, dims[0] * dims[1] * dims[2], str(path))
    return Tensor3(values.reshape(dims, order="C"))


def format_cmx(X: np.ndarray) -> str:
    X = np.asarray(X, dtype=np.complex128)
    if X.ndim != 2:
        raise DimensionError("matrix expected")
    m, r = X.shape
    lines = ["CMX 1", f"{m} {r}", *_pair_lines(X.ravel(order="F"))]
    return "\n".join(lines) + "\n"


def write_cmx(path, X: np.ndarray) -> None:
    Path(path).write_text(format_cmx(X), encoding="utf-8", newline="\n")


def read_cmx(path) -> np.ndarray:
    (m, r), body = _read_header(path, "CMX", 2)
    values = _parse_pairs(body, m * r, str(path))
    return values.reshape((m, r), order="F")


def _pairs(values: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in values]


def _unpairs(items, count: int, what: str) -> np.ndarray:
    if not isinstance(items, list) or len(items) != count:
        raise FormatError(f"{what}: expected a list of {count} [re, im] pairs")
    try:
        return np.array([complex(float(re), float(im)) for re, im in items])
    except (TypeError, ValueError):
        raise FormatError(f"{what}: entries must be [re, im] pairs") from None


def model_to_dict(M: CpModel) -> dict:
    return {
        "r": M.rank,
        "dims": list(M.dims),
        "lambda": _pairs(M.weights),
        "U": _pairs(M.U.ravel(order="F")),
        "V": _pairs(M.V.ravel(order="F")),
        "W": _pairs(M.W.ravel(order="F")),
    }


def model_from_dict(obj: dict) -> CpModel:
    try:
        r = int(obj["r"])
        l, m, n = (int(d) for d in obj["dims"])
    except (KeyError, TypeError, ValueError):
        raise FormatError("model must contain integer 'r' and three 'dims'") from None
    try:
        weights = _unpairs(obj["lambda"], r, "lambda")
        U = _unpairs(obj["U"], l * r, "U").reshape((l, r), order="F")
        V = _unpairs(obj["V"], m * r, "V").reshape((m, r), order="F")
        W = _unpairs(obj["W"], n * r, "W").reshape((n, r), order="F")
    except KeyError as exc:
        raise FormatError(f"model is missing field {exc}") from None
    return CpModel(weights, U, V, W)


def format_cpj(M: CpModel) -> str:
    return json.dumps(model_to_dict(M), indent=1) + "\n"


def write_cpj(path, M: CpModel) -> None:
    Path(path).write_text(format_cpj(M), encoding="utf-8", newline="\n")


def read_cpj(path) -> CpModel:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from None
    return model_from_dict(obj)
