"""Sensor-record ingestion and preprocessing.

Records are read from the comma-separated export written by the monitoring
device (``Person,Temp,LDR,Gas,PIR,Hum,Timestamp``) and turned into numeric
datasets for the classifiers: one-hot PIR columns, min-max scaling, label
factorization and epoch-second timestamps.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from typing import Iterable, Sequence, TextIO
from zoneinfo import ZoneInfo

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import DomainError, InputError, ParameterError, RecordError, SchemaError, ShapeError

logger = logging.getLogger(__name__)

HEADER = ("Person", "Temp", "LDR", "Gas", "PIR", "Hum", "Timestamp")
NUMERIC_COLUMNS = {"Temp": "temp_c", "LDR": "ldr_lux", "Gas": "gas_ppm", "Hum": "hum_pct"}
FEATURE_NAMES = ("Temp", "LDR", "Gas", "Hum", "PIR_No", "PIR_Yes")
PIR_VALUES = ("Yes", "No")
TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S.%f"
NO_PERSON = "No person"

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class SensorRecord:
    """One timestamped observation. ``None`` marks a missing field."""

    person: str | None
    temp_c: float | None
    ldr_lux: float | None
    gas_ppm: float | None
    pir: str | None
    hum_pct: float | None
    timestamp: datetime | None

    def is_complete(self):
        return all(getattr(self, f) is not None for f in _RECORD_FIELDS)

    def value(self, column):
        """Sensor value by CSV column name (``Temp``, ``LDR``, ``Gas``, ``Hum``)."""
        return getattr(self, NUMERIC_COLUMNS[column])


_RECORD_FIELDS = ("person", "temp_c", "ldr_lux", "gas_ppm", "pir", "hum_pct", "timestamp")


@dataclass
class Dataset:
    features: np.ndarray
    feature_names: tuple
    labels: np.ndarray
    label_names: tuple

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        self.feature_names = tuple(self.feature_names)
        self.label_names = tuple(self.label_names)
        if self.features.ndim != 2:
            raise ShapeError("features must be a 2-D matrix")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ShapeError(
                f"{self.features.shape[0]} feature rows but {self.labels.shape[0]} labels"
            )
        if len(self.feature_names) != self.features.shape[1]:
            raise ShapeError("feature_names does not match the column count")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise InputError("duplicate feature names")
        if len(set(self.label_names)) != len(self.label_names):
            raise InputError("duplicate label names")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= len(self.label_names)):
            raise InputError("label code outside [0, len(label_names))")

    @property
    def n_rows(self):
        return self.features.shape[0]

    def subset(self, rows):
        """Rows ``rows`` of this dataset, keeping both name registries."""
        rows = np.asarray(rows, dtype=int)
        return Dataset(self.features[rows], self.feature_names, self.labels[rows], self.label_names)


# ---------------------------------------------------------------------------
# parsing and serialization
# ---------------------------------------------------------------------------

def parse_timestamp(text):
    """Parse ``YYYY-MM-DD HH:MM:SS[.ffffff]``; a missing fraction means ``.000000``."""
    text = text.strip()
    fmt = TIMESTAMP_FORMAT if "." in text else "%Y-%m-%d %H:%M:%S"
    return datetime.strptime(text, fmt)


def format_timestamp(ts):
    return ts.strftime(TIMESTAMP_FORMAT)


def format_number(value):
    """Shortest text that parses back to ``value`` (``26.0`` prints as ``26``)."""
    if value is None:
        return ""
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def _parse_row(fields, row):
    values = {}
    for column, text in zip(HEADER, fields):
        text = text.strip()
        if text == "":
            values[column] = None
            continue
        if column in NUMERIC_COLUMNS:
            try:
                number = float(text)
            except ValueError:
                raise RecordError(row, column, f"not a number: {text!r}") from None
            if not math.isfinite(number):
                raise RecordError(row, column, f"non-finite value {text!r}")
            values[column] = number
        elif column == "PIR":
            if text not in PIR_VALUES:
                raise RecordError(row, column, f"expected Yes or No, got {text!r}")
            values[column] = text
        elif column == "Timestamp":
            try:
                values[column] = parse_timestamp(text)
            except ValueError:
                raise RecordError(row, column, f"bad timestamp {text!r}") from None
        else:
            values[column] = text

    hum, ldr, gas = values["Hum"], values["LDR"], values["Gas"]
    if hum is not None and not 0.0 <= hum <= 100.0:
        raise RecordError(row, "Hum", f"humidity {hum} outside [0, 100]")
    if ldr is not None and ldr < 0:
        raise RecordError(row, "LDR", f"negative light level {ldr}")
    if gas is not None and gas < 0:
        raise RecordError(row, "Gas", f"negative gas reading {gas}")

    return SensorRecord(
        person=values["Person"],
        temp_c=values["Temp"],
        ldr_lux=values["LDR"],
        gas_ppm=values["Gas"],
        pir=values["PIR"],
        hum_pct=values["Hum"],
        timestamp=values["Timestamp"],
    )


def _check_header(header):
    if header is None:
        raise SchemaError("missing header line", column=HEADER[0])
    header = [h.strip().lstrip("﻿") for h in header]
    for i, expected in enumerate(HEADER):
        got = header[i] if i < len(header) else None
        if got != expected:
            raise SchemaError(
                f"header column {i + 1} should be {expected!r}, got {got!r}", column=expected
            )
    if len(header) > len(HEADER):
        raise SchemaError(f"unexpected extra column {header[len(HEADER)]!r}", column=header[len(HEADER)])


def read_records(stream: TextIO, collect_errors=False):
    """Parse a record stream.

    Row numbers in errors count data rows from 1 (the header is not a row).
    With ``collect_errors`` the parser keeps going and returns
    ``(records, errors)``; otherwise the first bad row raises.
    """
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        if collect_errors:
            return [], []
        return []
    _check_header(header)

    records, errors = [], []
    for row, fields in enumerate(reader, start=1):
        if not fields or all(not f.strip() for f in fields):
            continue
        try:
            if len(fields) != len(HEADER):
                raise RecordError(row, HEADER[min(len(fields), len(HEADER) - 1)],
                                  f"expected {len(HEADER)} fields, got {len(fields)}")
            records.append(_parse_row(fields, row))
        except RecordError as exc:
            if not collect_errors:
                raise
            errors.append(exc)
    if collect_errors:
        return records, errors
    return records


def parse_records(text_stream, schema=HEADER):
    """Parse records from a character stream (or a string).

    ``schema`` is the expected column list; only the canonical header is
    supported.
    """
    if tuple(schema) != HEADER:
        raise SchemaError("only the canonical sensor header is supported", column=None)
    if isinstance(text_stream, str):
        text_stream = io.StringIO(text_stream, newline="")
    return read_records(text_stream)


def load_records(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return read_records(fh)


def record_to_row(record, person=None):
    """CSV line (with trailing newline) for one record."""
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow([
        record.person if person is None else person,
        format_number(record.temp_c),
        format_number(record.ldr_lux),
        format_number(record.gas_ppm),
        record.pir or "",
        format_number(record.hum_pct),
        format_timestamp(record.timestamp) if record.timestamp is not None else "",
    ])
    return buf.getvalue()


def header_line():
    return ",".join(HEADER) + "\n"


def write_records(records: Iterable[SensorRecord], stream: TextIO):
    stream.write(header_line())
    for record in records:
        stream.write(record_to_row(record))


def dump_records(records):
    buf = io.StringIO()
    write_records(records, buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------

def handle_missing(records: Sequence[SensorRecord], policy="drop_row"):
    """Drop or impute missing fields.

    ``impute_mean`` fills numeric gaps with the column mean over present
    values; records with a missing person, PIR or timestamp are dropped
    under either policy.
    """
    if policy not in ("drop_row", "impute_mean"):
        raise ParameterError(f"unknown missing-value policy {policy!r}")

    if policy == "drop_row":
        kept = [r for r in records if r.is_complete()]
    else:
        kept = [r for r in records if r.person is not None and r.pir is not None
                and r.timestamp is not None]
        fills = {}
        for column, attr in NUMERIC_COLUMNS.items():
            present = [getattr(r, attr) for r in kept if getattr(r, attr) is not None]
            if len(present) < len(kept):
                if not present:
                    raise InputError(f"column {column} has no values to impute from")
                fills[attr] = math.fsum(present) / len(present)
        if fills:
            kept = [
                replace(r, **{a: v for a, v in fills.items() if getattr(r, a) is None})
                for r in kept
            ]

    dropped = len(records) - len(kept)
    if dropped:
        logger.info("handle_missing(%s): dropped %d of %d records", policy, dropped, len(records))
    return kept


def encode_pir(records: Sequence[SensorRecord]):
    """One-hot PIR columns ``(pir_no, pir_yes)`` as two float arrays."""
    yes = np.array([r.pir == "Yes" for r in records], dtype=float)
    for i, r in enumerate(records):
        if r.pir not in PIR_VALUES:
            raise RecordError(i + 1, "PIR", f"expected Yes or No, got {r.pir!r}")
    return 1.0 - yes, yes


def factorize_labels(person_labels: Sequence[str]):
    """Codes in first-occurrence order, like ``pandas.factorize``.

    Returns ``(label_names, codes)``; ``label_names[code]`` inverts the map.
    """
    if len(person_labels) == 0:
        raise InputError("cannot factorize an empty label list")
    mapping = {}
    codes = np.empty(len(person_labels), dtype=int)
    for i, label in enumerate(person_labels):
        codes[i] = mapping.setdefault(label, len(mapping))
    return tuple(mapping), codes


def timestamp_to_epoch(ts: datetime, tz="UTC"):
    """Seconds since 1970-01-01T00:00:00 UTC, fractional part kept.

    Naive timestamps are read as wall-clock time in ``tz``.
    """
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=ZoneInfo(tz))
    delta = ts - _EPOCH
    if delta.days < 0:
        raise DomainError(f"timestamp {ts.isoformat()} is before the 1970 epoch")
    return delta.total_seconds()


def _require_complete(records):
    if len(records) == 0:
        raise InputError("no records")
    for i, r in enumerate(records):
        if not r.is_complete():
            missing = [f for f in _RECORD_FIELDS if getattr(r, f) is None]
            raise RecordError(i + 1, missing[0], "missing value; run handle_missing first")


def build_feature_dataset(records: Sequence[SensorRecord]):
    """Feature matrix ``[Temp, LDR, Gas, Hum, PIR_No, PIR_Yes]``; timestamp dropped."""
    _require_complete(records)
    pir_no, pir_yes = encode_pir(records)
    X = np.column_stack([
        [r.temp_c for r in records],
        [r.ldr_lux for r in records],
        [r.gas_ppm for r in records],
        [r.hum_pct for r in records],
        pir_no,
        pir_yes,
    ])
    names, codes = factorize_labels([r.person for r in records])
    return Dataset(X, FEATURE_NAMES, codes, names)


def build_time_dataset(records: Sequence[SensorRecord], tz="UTC"):
    """Single ``Epoch`` feature column with factorized person labels."""
    _require_complete(records)
    X = np.array([[timestamp_to_epoch(r.timestamp, tz)] for r in records])
    names, codes = factorize_labels([r.person for r in records])
    return Dataset(X, ("Epoch",), codes, names)


# ---------------------------------------------------------------------------
# min-max scaling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalerParams:
    data_min: np.ndarray
    data_max: np.ndarray
    new_min: float = 0.0
    new_max: float = 1.0

    def __post_init__(self):
        if not self.new_max > self.new_min:
            raise ParameterError("new_max must exceed new_min")
        if np.any(np.asarray(self.data_max) < np.asarray(self.data_min)):
            raise ParameterError("data_max below data_min")

    def to_dict(self):
        return {
            "data_min": [float(v) for v in self.data_min],
            "data_max": [float(v) for v in self.data_max],
            "new_min": float(self.new_min),
            "new_max": float(self.new_max),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["data_min"], dtype=float), np.asarray(d["data_max"], dtype=float),
                   float(d["new_min"]), float(d["new_max"]))


def fit_minmax(features, new_range=(0.0, 1.0)):
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InputError("fit_minmax needs a non-empty 2-D matrix")
    return ScalerParams(X.min(axis=0), X.max(axis=0), float(new_range[0]), float(new_range[1]))


def _span(params):
    span = params.data_max - params.data_min
    return np.where(span > 0, span, 1.0), span > 0


def apply_minmax(params: ScalerParams, features):
    """Rescale columns; constant training columns map to ``new_min``. No clamping."""
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(params.data_min):
        raise ShapeError(f"expected {len(params.data_min)} columns, got shape {X.shape}")
    span, varying = _span(params)
    unit = np.where(varying, (X - params.data_min) / span, 0.0)
    return unit * (params.new_max - params.new_min) + params.new_min


def invert_minmax(params: ScalerParams, scaled):
    X = np.asarray(scaled, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(params.data_min):
        raise ShapeError(f"expected {len(params.data_min)} columns, got shape {X.shape}")
    span, _ = _span(params)
    return (X - params.new_min) / (params.new_max - params.new_min) * span + params.data_min


class MinMaxScaler(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`fit_minmax` / :func:`apply_minmax`."""

    def __init__(self, feature_range=(0.0, 1.0)):
        self.feature_range = feature_range

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        self.params_ = fit_minmax(X, self.feature_range)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        return apply_minmax(self.params_, check_array(X, dtype=float))

    def inverse_transform(self, X):
        check_is_fitted(self, "params_")
        return invert_minmax(self.params_, check_array(X, dtype=float))
