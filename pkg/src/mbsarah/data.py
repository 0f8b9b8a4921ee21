"""Datasets: LIBSVM parsing/serialization, synthetic generation, fetching."""
import bz2
import hashlib
import logging
import os
import tempfile
import urllib.error
import urllib.request
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse

from .linalg import SparseVector

log = logging.getLogger(__name__)

CLASSIFICATION = "classification"
REGRESSION = "regression"

# dense storage below this many cells, CSR above
DENSE_CELL_LIMIT = 25_000_000

LIBSVM_BASE = "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary/"
DEFAULT_SOURCES = {
    "a8a": {"url": LIBSVM_BASE + "a8a", "dim": "123"},
    "w8a": {"url": LIBSVM_BASE + "w8a", "dim": "300"},
    "ijcnn1": {"url": LIBSVM_BASE + "ijcnn1.bz2", "dim": "22"},
}


class ParseError(ValueError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class FetchError(RuntimeError):
    """Download failed; ``retriable`` is True for transport-level failures."""

    def __init__(self, message, retriable=True):
        super().__init__(message)
        self.retriable = retriable


class ChecksumError(FetchError):
    def __init__(self, message):
        super().__init__(message, retriable=False)


@dataclass(frozen=True)
class Example:
    features: SparseVector
    label: float


@dataclass(frozen=True, eq=False)
class Dataset:
    examples: tuple
    dim: int
    name: str = "dataset"

    def __post_init__(self):
        object.__setattr__(self, "examples", tuple(self.examples))
        if len(self.examples) < 1:
            raise ValueError("a dataset needs at least one example")
        for i, ex in enumerate(self.examples):
            if ex.features.dim != self.dim:
                raise ValueError(f"example {i} has dim {ex.features.dim}, expected {self.dim}")

    @property
    def n(self) -> int:
        return len(self.examples)

    def __len__(self):
        return len(self.examples)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.dim == other.dim and self.examples == other.examples

    __hash__ = object.__hash__

    @cached_property
    def labels(self) -> np.ndarray:
        y = np.array([ex.label for ex in self.examples], dtype=np.float64)
        y.setflags(write=False)
        return y

    @cached_property
    def csr(self) -> sparse.csr_matrix:
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([ex.features.nnz for ex in self.examples])
        if indptr[-1]:
            indices = np.concatenate([ex.features.indices for ex in self.examples])
            data = np.concatenate([ex.features.values for ex in self.examples])
        else:
            indices = np.zeros(0, dtype=np.int64)
            data = np.zeros(0)
        return sparse.csr_matrix((data, indices, indptr), shape=(self.n, self.dim))

    @cached_property
    def matrix(self):
        """Feature matrix: dense ndarray when small enough, else CSR."""
        if self.n * self.dim <= DENSE_CELL_LIMIT:
            X = self.csr.toarray()
            X.setflags(write=False)
            return X
        return self.csr

    @cached_property
    def row_norms_sq(self) -> np.ndarray:
        return np.array([float(ex.features.values @ ex.features.values) for ex in self.examples])

    def zero_rows(self) -> list:
        return [i for i, ex in enumerate(self.examples) if ex.features.nnz == 0]

    def content_hash(self) -> str:
        return hashlib.sha256(serialize_libsvm(self).encode()).hexdigest()


def _read_text(stream) -> str:
    if isinstance(stream, (bytes, bytearray)):
        return bytes(stream).decode("utf-8")
    if isinstance(stream, str):
        return stream
    data = stream.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data


def parse_libsvm(stream, task=CLASSIFICATION, dim=None, name="libsvm") -> Dataset:
    """Parse LIBSVM text (``label idx:val ...``, 1-based indices).

    ``stream`` may be a binary or text file object, bytes, or str.
    Classification labels are coerced to +1 (label > 0) or -1.
    ``dim`` overrides the inferred dimension (max index seen).
    """
    text = _read_text(stream)
    rows = []
    max_idx = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise ParseError(f"bad label {tokens[0]!r}", lineno) from None
        if task == CLASSIFICATION:
            label = 1.0 if label > 0 else -1.0
        idx = np.empty(len(tokens) - 1, dtype=np.int64)
        val = np.empty(len(tokens) - 1)
        for j, tok in enumerate(tokens[1:]):
            key, sep, value = tok.partition(":")
            if not sep:
                raise ParseError(f"malformed token {tok!r}", lineno)
            try:
                idx[j] = int(key)
                val[j] = float(value)
            except ValueError:
                raise ParseError(f"malformed token {tok!r}", lineno) from None
        if idx.size:
            if idx[0] < 1:
                raise ParseError(f"index {idx[0]} is not 1-based", lineno)
            if np.any(np.diff(idx) <= 0):
                raise ParseError("indices not strictly increasing", lineno)
            max_idx = max(max_idx, int(idx[-1]))
        rows.append((idx - 1, val, label))
    if not rows:
        raise ParseError("empty file")
    if dim is None:
        dim = max_idx
    elif dim < max_idx:
        raise ParseError(f"dimension override {dim} smaller than max index {max_idx}")
    examples = tuple(Example(SparseVector(i, v, dim), lab) for i, v, lab in rows)
    return Dataset(examples, dim, name)


def _fmt_label(y: float) -> str:
    if y == 1.0:
        return "+1"
    if y == -1.0:
        return "-1"
    return repr(float(y))


def serialize_libsvm(ds: Dataset) -> str:
    lines = []
    for ex in ds.examples:
        parts = [_fmt_label(ex.label)]
        parts += [f"{i + 1}:{float(v)!r}" for i, v in zip(ex.features.indices, ex.features.values)]
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def normalize_rows(ds: Dataset) -> Dataset:
    """Scale each feature row to unit Euclidean norm; zero rows stay as they are."""
    out = []
    zero = []
    for i, ex in enumerate(ds.examples):
        nrm = float(np.sqrt(ex.features.values @ ex.features.values))
        if nrm == 0.0:
            zero.append(i)
            out.append(ex)
            continue
        f = SparseVector(ex.features.indices, ex.features.values / nrm, ds.dim)
        out.append(Example(f, ex.label))
    if zero:
        log.warning("normalize_rows: %d all-zero rows left unchanged: %s", len(zero), zero[:10])
    return Dataset(tuple(out), ds.dim, ds.name + "+norm")


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    d: int
    seed: int = 0
    condition_hint: float = 10.0
    task: str = CLASSIFICATION

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError("n and d must be >= 1")
        if self.condition_hint <= 0:
            raise ValueError("condition_hint must be positive")
        if self.task not in (CLASSIFICATION, REGRESSION):
            raise ValueError(f"unknown task {self.task!r}")


LABEL_FLIP_RATE = 0.05
REGRESSION_NOISE = 0.01


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Seeded Gaussian design with per-feature scales spread over ``condition_hint``.

    Feature j is scaled by ``condition_hint ** (-j / (2 (d - 1)))`` so the
    population covariance has condition number ``condition_hint``.
    """
    rng = np.random.default_rng(spec.seed)
    w_true = rng.standard_normal(spec.d)
    if spec.d > 1:
        scales = spec.condition_hint ** (-np.arange(spec.d) / (2.0 * (spec.d - 1)))
    else:
        scales = np.ones(1)
    X = rng.standard_normal((spec.n, spec.d)) * scales
    t = X @ w_true
    if spec.task == CLASSIFICATION:
        y = np.where(t >= 0, 1.0, -1.0)
        n_flip = int(LABEL_FLIP_RATE * spec.n)
        if n_flip:
            flip = rng.choice(spec.n, n_flip, replace=False)
            y[flip] = -y[flip]
    else:
        y = t + REGRESSION_NOISE * rng.standard_normal(spec.n)
    examples = tuple(Example(SparseVector.from_dense(X[i]), float(y[i])) for i in range(spec.n))
    name = f"synthetic-{spec.task[:3]}-n{spec.n}-d{spec.d}-s{spec.seed}"
    return Dataset(examples, spec.d, name)


def load_source_config(path) -> dict:
    """Read a flat ``key = value`` file; keys look like ``a8a.url``, ``a8a.sha256``.

    Returns ``{name: {field: value}}`` merged over the built-in defaults.
    """
    sources = {k: dict(v) for k, v in DEFAULT_SOURCES.items()}
    if path is None:
        return sources
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or "." not in key:
            raise ParseError(f"expected 'name.field = value', got {line!r}", lineno)
        name, fld = key.strip().split(".", 1)
        sources.setdefault(name, {})[fld.strip()] = value.strip()
    return sources


def cache_path(name, cache_dir) -> Path:
    return Path(cache_dir) / f"{name}.libsvm"


def _download(url, timeout=60) -> bytes:
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            return resp.read()
    except (urllib.error.URLError, OSError) as exc:
        raise FetchError(f"download of {url} failed: {exc}") from exc


def fetch_dataset(name, cache_dir, sources=None, task=CLASSIFICATION, dim=None):
    """Return the named dataset, downloading into ``cache_dir`` on a cache miss.

    Returns ``(dataset, cache_hit)``. Optional ``size``/``sha256`` fields in the
    source entry are checked against the (decompressed) payload.
    """
    sources = sources if sources is not None else load_source_config(None)
    if name not in sources:
        raise KeyError(f"unknown dataset {name!r}; known: {sorted(sources)}")
    entry = sources[name]
    path = cache_path(name, cache_dir)
    hit = path.exists()
    if not hit:
        if "url" not in entry:
            raise FetchError(f"no url configured for {name!r}", retriable=False)
        payload = _download(entry["url"])
        if entry["url"].endswith(".bz2"):
            payload = bz2.decompress(payload)
        if "size" in entry and len(payload) != int(entry["size"]):
            raise ChecksumError(f"{name}: expected {entry['size']} bytes, got {len(payload)}")
        if "sha256" in entry and hashlib.sha256(payload).hexdigest() != entry["sha256"].lower():
            raise ChecksumError(f"{name}: sha256 mismatch")
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=cache_dir, prefix=f".{name}.", suffix=".part")
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    if dim is None and "dim" in entry:
        dim = int(entry["dim"])
    with open(path, "rb") as fh:
        ds = parse_libsvm(fh, task=task, dim=dim, name=name)
    return ds, hit
