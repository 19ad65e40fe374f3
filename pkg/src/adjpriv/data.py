"""Tabular datasets: UCI Adult preprocessing, synthetic data, splits and batches.

Adult recipe
------------
* rows containing the ``?`` missing marker are dropped;
* the six continuous attributes (``education-num`` included) are min-max
  scaled to [0, 1];
* the seven remaining categorical attributes are one-hot encoded with vocabularies
  built from the cleaned records;
* ``sex`` becomes the private label (Male = 1) and ``income`` the non-private
  label (>50K = 1); both are removed from the features.

With the standard ``adult.data`` + ``adult.test`` files this yields 106
encoded columns, 102 of which are features.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

log = logging.getLogger(__name__)

ADULT_COLUMNS = (
    "age", "workclass", "fnlwgt", "education", "education-num", "marital-status",
    "occupation", "relationship", "race", "sex", "capital-gain", "capital-loss",
    "hours-per-week", "native-country", "income",
)
ADULT_CONTINUOUS = ("age", "fnlwgt", "education-num", "capital-gain", "capital-loss",
                    "hours-per-week")
ADULT_CATEGORICAL = ("workclass", "education", "marital-status", "occupation",
                     "relationship", "race", "native-country")
PRIVATE_ATTR, PRIVATE_POSITIVE = "sex", "Male"
NONPRIVATE_ATTR, NONPRIVATE_POSITIVE = "income", ">50K"
MISSING = "?"

TARGET_ENCODED_WIDTH = 106
TARGET_FEATURE_WIDTH = 102


@dataclass(frozen=True)
class Column:
    name: str
    attribute: str
    kind: str  # "category" or "continuous"
    category: str | None = None
    lo: float | None = None
    hi: float | None = None

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


@dataclass
class Dataset:
    features: np.ndarray
    y_private: np.ndarray
    y_nonprivate: np.ndarray
    column_map: list[Column] = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.y_private = np.asarray(self.y_private, dtype=np.int64)
        self.y_nonprivate = np.asarray(self.y_nonprivate, dtype=np.int64)
        n = self.features.shape[0]
        if self.features.ndim != 2 or len(self.y_private) != n or len(self.y_nonprivate) != n:
            raise DataError("features and labels disagree on the record count")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def width(self) -> int:
        return self.features.shape[1]

    def labels(self, target: str) -> np.ndarray:
        if target == "private":
            return self.y_private
        if target == "nonprivate":
            return self.y_nonprivate
        raise ValueError(f"target must be 'private' or 'nonprivate', got {target!r}")

    def subset(self, idx) -> Dataset:
        idx = np.asarray(idx)
        return Dataset(self.features[idx], self.y_private[idx], self.y_nonprivate[idx],
                       self.column_map)

    def with_features(self, features) -> Dataset:
        return Dataset(features, self.y_private.copy(), self.y_nonprivate.copy(), self.column_map)


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")


@dataclass(frozen=True)
class SynthSpec:
    n: int = 4096
    group_sizes: tuple[int, ...] = (3, 4, 5, 6)
    num_continuous: int = 4
    correlation: float = 0.9
    seed: int = 0
    signal_columns: int = 1  # label-coupled binary columns per label

    @property
    def num_onehot_groups(self) -> int:
        return len(self.group_sizes)

    def __post_init__(self):
        if not 0.0 <= self.correlation <= 1.0:
            raise ValueError("correlation must be in [0, 1]")
        if self.n < 1 or self.num_continuous < 0 or self.signal_columns < 1:
            raise ValueError("dimensions must be positive")
        if any(s < 1 for s in self.group_sizes):
            raise ValueError("group sizes must be positive")


# --------------------------------------------------------------------------- Adult

def parse_adult_lines(lines: Iterable[str], header: bool = False) -> list[list[str]]:
    """Split raw Adult CSV lines into stripped fields.

    Blank lines and the ``|``-prefixed banner of ``adult.test`` are skipped. The
    trailing period on ``adult.test`` income labels is removed.
    """
    records = []
    first = True
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("|"):
            continue
        if header and first:
            first = False
            continue
        first = False
        fields = [f.strip() for f in next(csv.reader([text]))]
        if len(fields) != len(ADULT_COLUMNS):
            raise DataError(f"line {lineno}: expected {len(ADULT_COLUMNS)} fields, got {len(fields)}")
        fields[-1] = fields[-1].rstrip(".")
        records.append(fields)
    return records


def read_adult(paths: str | Path | Sequence[str | Path], header: bool = False) -> list[list[str]]:
    if isinstance(paths, (str, Path)):
        paths = [paths]
    records = []
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            try:
                records.extend(parse_adult_lines(fh, header=header))
            except DataError as exc:
                raise DataError(f"{p}: {exc}") from None
    return records


def drop_missing(records: Sequence[Sequence[str]]) -> list[list[str]]:
    return [list(r) for r in records if MISSING not in r]


class AdultEncoder:
    """One-hot / min-max encoder for cleaned Adult records."""

    def __init__(self):
        self.vocab: dict[str, list[str]] = {}
        self.ranges: dict[str, tuple[float, float]] = {}

    def fit(self, records: Sequence[Sequence[str]], scale_records=None) -> AdultEncoder:
        """Build vocabularies from ``records``; min-max ranges from ``scale_records``
        (defaults to ``records``)."""
        idx = {c: i for i, c in enumerate(ADULT_COLUMNS)}
        for attr in ADULT_CATEGORICAL + (PRIVATE_ATTR, NONPRIVATE_ATTR):
            self.vocab[attr] = sorted({r[idx[attr]] for r in records})
        for attr in (PRIVATE_ATTR, NONPRIVATE_ATTR):
            if len(self.vocab[attr]) != 2:
                raise DataError(f"{attr} must be binary, found {self.vocab[attr]}")
        scale_records = records if scale_records is None else scale_records
        for attr in ADULT_CONTINUOUS:
            vals = self._numeric(scale_records, attr)
            self.ranges[attr] = (float(vals.min()), float(vals.max()))
        return self

    @staticmethod
    def _numeric(records, attr) -> np.ndarray:
        i = ADULT_COLUMNS.index(attr)
        try:
            return np.array([float(r[i]) for r in records])
        except ValueError as exc:
            raise DataError(f"non-numeric value in {attr}: {exc}") from None

    @property
    def column_map(self) -> list[Column]:
        cols = []
        for attr in ADULT_COLUMNS:
            if attr in ADULT_CONTINUOUS:
                lo, hi = self.ranges[attr]
                cols.append(Column(attr, attr, "continuous", lo=lo, hi=hi))
            elif attr in ADULT_CATEGORICAL:
                cols.extend(Column(f"{attr}={v}", attr, "category", category=v)
                            for v in self.vocab[attr])
        return cols

    @property
    def encoded_width(self) -> int:
        return len(self.column_map) + len(self.vocab[PRIVATE_ATTR]) + len(self.vocab[NONPRIVATE_ATTR])

    def transform(self, records: Sequence[Sequence[str]], clip: bool = False) -> Dataset:
        if not self.vocab:
            raise RuntimeError("encoder is not fitted")
        if any(MISSING in r for r in records):
            raise DataError("records contain the missing marker; drop them first")
        n = len(records)
        blocks = []
        for attr in ADULT_COLUMNS:
            i = ADULT_COLUMNS.index(attr)
            if attr in ADULT_CONTINUOUS:
                lo, hi = self.ranges[attr]
                vals = self._numeric(records, attr)
                scaled = (vals - lo) / (hi - lo) if hi > lo else np.zeros(n)
                if clip:
                    scaled = np.clip(scaled, 0.0, 1.0)
                blocks.append(scaled[:, None])
            elif attr in ADULT_CATEGORICAL:
                blocks.append(self._onehot(records, attr, i))
        features = np.hstack(blocks) if n else np.zeros((0, len(self.column_map)))
        y_p = self._binary(records, PRIVATE_ATTR, PRIVATE_POSITIVE)
        y_np = self._binary(records, NONPRIVATE_ATTR, NONPRIVATE_POSITIVE)
        return Dataset(features, y_p, y_np, self.column_map)

    def _onehot(self, records, attr, i) -> np.ndarray:
        lookup = {v: j for j, v in enumerate(self.vocab[attr])}
        out = np.zeros((len(records), len(lookup)))
        for row, r in enumerate(records):
            try:
                out[row, lookup[r[i]]] = 1.0
            except KeyError:
                raise DataError(f"unknown {attr} category {r[i]!r}") from None
        return out

    def _binary(self, records, attr, positive) -> np.ndarray:
        i = ADULT_COLUMNS.index(attr)
        vocab = set(self.vocab[attr])
        labels = np.empty(len(records), dtype=np.int64)
        for row, r in enumerate(records):
            if r[i] not in vocab:
                raise DataError(f"unknown {attr} value {r[i]!r}")
            labels[row] = int(r[i] == positive)
        return labels

    def decode(self, row, y_private: int, y_nonprivate: int) -> list[str]:
        """Rebuild a raw record from an encoded row (continuous values rescaled)."""
        row = np.asarray(row, dtype=float)
        out: dict[str, str] = {}
        pos = 0
        for attr in ADULT_COLUMNS:
            if attr in ADULT_CONTINUOUS:
                lo, hi = self.ranges[attr]
                out[attr] = repr(float(lo + row[pos] * (hi - lo)))
                pos += 1
            elif attr in ADULT_CATEGORICAL:
                k = len(self.vocab[attr])
                out[attr] = self.vocab[attr][int(np.argmax(row[pos:pos + k]))]
                pos += k
        sex = self.vocab[PRIVATE_ATTR]
        out[PRIVATE_ATTR] = PRIVATE_POSITIVE if y_private else next(v for v in sex if v != PRIVATE_POSITIVE)
        inc = self.vocab[NONPRIVATE_ATTR]
        out[NONPRIVATE_ATTR] = NONPRIVATE_POSITIVE if y_nonprivate else next(v for v in inc if v != NONPRIVATE_POSITIVE)
        return [out.get(c, "") for c in ADULT_COLUMNS]


def _log_widths(enc: AdultEncoder, n_features: int):
    if enc.encoded_width != TARGET_ENCODED_WIDTH:
        log.warning("encoded width %d differs from the reference %d by %d",
                    enc.encoded_width, TARGET_ENCODED_WIDTH, enc.encoded_width - TARGET_ENCODED_WIDTH)
    if n_features != TARGET_FEATURE_WIDTH:
        log.warning("feature width %d differs from the reference %d", n_features, TARGET_FEATURE_WIDTH)


def load_adult(raw_records: Sequence[Sequence[str]]) -> Dataset:
    """Clean and encode Adult records, normalizing over all retained rows."""
    records = drop_missing(raw_records)
    if not records:
        raise DataError("no complete records")
    enc = AdultEncoder().fit(records)
    ds = enc.transform(records)
    _log_widths(enc, ds.width)
    return ds


def preprocess_adult(raw_records, config: SplitConfig = SplitConfig()):
    """Clean, split and encode Adult records without test-side leakage.

    Vocabularies come from all cleaned records; min-max ranges from the
    training side only, and test values are clipped to [0, 1].

    Returns ``(train, test, encoder)``.
    """
    records = drop_missing(raw_records)
    if len(records) < 2:
        raise DataError("need at least two complete records")
    train_idx, test_idx = split_indices(len(records), config)
    train_rec = [records[i] for i in train_idx]
    test_rec = [records[i] for i in test_idx]
    enc = AdultEncoder().fit(records, scale_records=train_rec)
    train = enc.transform(train_rec)
    test = enc.transform(test_rec, clip=True)
    _log_widths(enc, train.width)
    return train, test, enc


# --------------------------------------------------------------------------- splits

def split_indices(n: int, config: SplitConfig) -> tuple[np.ndarray, np.ndarray]:
    n_train = int(np.floor(config.train_fraction * n))
    if n_train == 0 or n_train == n:
        raise DataError(f"fraction {config.train_fraction} leaves an empty side for n={n}")
    perm = np.random.default_rng(config.seed).permutation(n)
    return perm[:n_train], perm[n_train:]


def split(dataset: Dataset, config: SplitConfig) -> tuple[Dataset, Dataset]:
    train_idx, test_idx = split_indices(len(dataset), config)
    return dataset.subset(train_idx), dataset.subset(test_idx)


def minibatches(n: int | Dataset, batch_size: int, seed) -> list[np.ndarray]:
    """Seeded permutation of ``range(n)`` chunked into batches (last may be short)."""
    if isinstance(n, Dataset):
        n = len(n)
    if batch_size < 1:
        raise ValueError("batch size must be >= 1")
    perm = np.random.default_rng(seed).permutation(n)
    return [perm[i:i + batch_size] for i in range(0, n, batch_size)]


# --------------------------------------------------------------------------- synthetic

def synth_generate(spec: SynthSpec) -> Dataset:
    """Random one-hot + continuous features with label-coupled indicator columns.

    Each label gets ``signal_columns`` binary columns that equal the label with
    probability ``(1 + correlation) / 2``; everything else is independent noise.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    y_np = rng.integers(0, 2, n)
    y_p = rng.integers(0, 2, n)
    blocks, cols = [], []
    for g, size in enumerate(spec.group_sizes):
        cat = rng.integers(0, size, n)
        blocks.append(np.eye(size)[cat])
        cols.extend(Column(f"g{g}={c}", f"g{g}", "category", category=str(c)) for c in range(size))
    if spec.num_continuous:
        blocks.append(rng.random((n, spec.num_continuous)))
        cols.extend(Column(f"c{j}", f"c{j}", "continuous", lo=0.0, hi=1.0)
                    for j in range(spec.num_continuous))
    agree_p = (1.0 + spec.correlation) / 2.0
    for name, y in (("nonprivate", y_np), ("private", y_p)):
        for j in range(spec.signal_columns):
            agree = rng.random(n) < agree_p
            blocks.append(np.where(agree, y, 1 - y).astype(float)[:, None])
            cols.append(Column(f"signal_{name}_{j}", f"signal_{name}_{j}", "category", category="1"))
    return Dataset(np.hstack(blocks), y_p, y_np, cols)


# --------------------------------------------------------------------------- CSV I/O

def format_float(v: float) -> str:
    return repr(float(v))


def dataset_to_csv(dataset: Dataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = [c.name for c in dataset.column_map] or [f"x{j}" for j in range(dataset.width)]
    if len(names) != dataset.width:
        names = [f"x{j}" for j in range(dataset.width)]
    writer.writerow([*names, "y_private", "y_nonprivate"])
    for row, yp, ynp in zip(dataset.features, dataset.y_private, dataset.y_nonprivate):
        writer.writerow([*map(format_float, row), int(yp), int(ynp)])
    return buf.getvalue()


def write_dataset(dataset: Dataset, path: str | Path):
    Path(path).write_text(dataset_to_csv(dataset), encoding="utf-8")


def read_dataset(path: str | Path) -> Dataset:
    """Read a dataset CSV (features, then y_private, y_nonprivate)."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if header[-2:] != ["y_private", "y_nonprivate"]:
            raise DataError(f"{path}: last two columns must be y_private, y_nonprivate")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric field") from None
    arr = np.array(rows).reshape(len(rows), len(header))
    cols = [Column(name, name.split("=")[0], "category" if "=" in name else "continuous",
                   category=name.split("=", 1)[1] if "=" in name else None)
            for name in header[:-2]]
    return Dataset(arr[:, :-2], arr[:, -2].astype(np.int64), arr[:, -1].astype(np.int64), cols)


def majority_rate(labels) -> float:
    labels = np.asarray(labels)
    if labels.size == 0:
        raise DataError("empty label vector")
    return float(np.bincount(labels).max() / labels.size)
