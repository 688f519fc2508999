"""
Dataset loading and saving.

CSV files carry a header row and an optional `label` column. Binary files
start with the magic b"HTSN", then little-endian u32 n and d and four
reserved zero bytes, then n*d little-endian float64 values in row order;
labels live in an optional sidecar of n little-endian u32 (default: the
data path plus ".labels").
"""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from src.embedding_model import DataMatrix, DatasetParseError

logger = logging.getLogger(__name__)

MAGIC = b"HTSN"
HEADER_BYTES = 16
LABEL_COLUMN = "label"


def infer_format(path):
    suffix = Path(path).suffix.lower()
    return "csv" if suffix in (".csv", ".txt") else "binary"


def sidecar_path(path):
    return Path(str(path) + ".labels")


def _load_csv(path):
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except pd.errors.ParserError as error:
        raise DatasetParseError(f"{path}: {error}") from error
    except pd.errors.EmptyDataError as error:
        raise DatasetParseError(f"{path}: line 1: empty file") from error

    labels = None
    if LABEL_COLUMN in frame.columns:
        labels = frame.pop(LABEL_COLUMN).to_numpy()
    if frame.shape[1] == 0:
        raise DatasetParseError(f"{path}: line 1: no feature columns")

    numeric = frame.apply(pd.to_numeric, errors="coerce")
    bad = ~np.isfinite(numeric.to_numpy(dtype=np.float64))
    if bad.any():
        row, col = np.argwhere(bad)[0]
        # line 1 is the header
        raise DatasetParseError(
            f"{path}: line {row + 2}: column '{frame.columns[col]}' is not a finite number "
            f"({frame.iat[row, col]!r})")
    return numeric.to_numpy(dtype=np.float64), labels


def _load_binary(path, labels_path=None):
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_BYTES:
        raise DatasetParseError(f"{path}: offset 0: header needs {HEADER_BYTES} bytes, file has {len(raw)}")
    if raw[:4] != MAGIC:
        raise DatasetParseError(f"{path}: offset 0: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    n, d = (int(v) for v in np.frombuffer(raw, dtype="<u4", count=2, offset=4))
    if n < 1 or d < 1:
        raise DatasetParseError(f"{path}: offset 4: invalid shape n={n}, d={d}")

    expected = HEADER_BYTES + 8 * n * d
    if len(raw) != expected:
        raise DatasetParseError(
            f"{path}: offset {HEADER_BYTES}: payload of {len(raw) - HEADER_BYTES} bytes, "
            f"expected {8 * n * d} for n={n}, d={d}")
    values = np.frombuffer(raw, dtype="<f8", offset=HEADER_BYTES).astype(np.float64).reshape(n, d)
    bad = ~np.isfinite(values.ravel())
    if bad.any():
        index = int(np.argmax(bad))
        raise DatasetParseError(f"{path}: offset {HEADER_BYTES + 8 * index}: non-finite value")

    labels_path = sidecar_path(path) if labels_path is None else Path(labels_path)
    labels = None
    if labels_path.exists():
        label_raw = labels_path.read_bytes()
        if len(label_raw) != 4 * n:
            raise DatasetParseError(
                f"{labels_path}: offset {min(len(label_raw), 4 * n)}: "
                f"expected {4 * n} bytes of labels, found {len(label_raw)}")
        labels = np.frombuffer(label_raw, dtype="<u4").astype(np.int64)
    return values, labels


def load_dataset(path, format=None, labels_path=None):
    """
    Load a dataset from disk.

    Args:
        path (str): Data file
        format (str): "csv" or "binary" (inferred from the suffix when None)
        labels_path (str): Binary label sidecar (default: path + ".labels")

    Returns:
        DataMatrix: values and optional labels

    Raises:
        DatasetParseError: malformed file, with the line or byte offset
        FileNotFoundError: path does not exist
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Dataset not found: {path}")
    format = infer_format(path) if format is None else format.lower()

    if format == "csv":
        values, labels = _load_csv(path)
    elif format == "binary":
        values, labels = _load_binary(path, labels_path)
    else:
        raise ValueError(f"Unknown dataset format: {format}")

    if values.shape[0] < 2:
        raise DatasetParseError(f"{path}: need at least two rows, found {values.shape[0]}")
    data = DataMatrix(values, labels)
    logger.info(f"Loaded {data!r} from {path}")
    return data


def save_dataset(data, path, format=None):
    """
    Write a DataMatrix in CSV or binary form; load_dataset reads it back exactly.

    Returns:
        str: Path written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    format = infer_format(path) if format is None else format.lower()

    if format == "csv":
        frame = pd.DataFrame(data.values, columns=[f"x{j}" for j in range(data.n_dims)])
        if data.labels is not None:
            frame[LABEL_COLUMN] = data.labels
        frame.to_csv(path, index=False, float_format="%.17g")
    elif format == "binary":
        header = MAGIC + np.array([data.n_points, data.n_dims, 0], dtype="<u4").tobytes()
        path.write_bytes(header + data.values.astype("<f8").tobytes())
        if data.labels is not None:
            sidecar_path(path).write_bytes(np.asarray(data.labels).astype("<u4").tobytes())
    else:
        raise ValueError(f"Unknown dataset format: {format}")
    return str(path)


if __name__ == "__main__":
    from src.config import DEMO_DATASET

    demo = load_dataset(DEMO_DATASET)
    print(f"Loaded {demo.n_points} points with {demo.n_dims} dimensions")
