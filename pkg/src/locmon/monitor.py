"""Threshold alerting and the edge-filtered ingestion pipeline.

Every accepted sensor event lands in the local store; only events carrying
a person detection are pushed to the cloud store. Threshold bounds come
from box-whisker fences (or manual overrides) and every violation becomes
an :class:`AlertEvent` on the alert sink.
"""

from __future__ import annotations

import json
import logging
import math
import time
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field, replace
from datetime import timedelta
from typing import Iterable

from .dataset import (
    NO_PERSON,
    SensorRecord,
    format_number,
    format_timestamp,
    header_line,
    record_to_row,
    timestamp_to_epoch,
)
from .errors import DeliveryError, InputError, OutOfOrderError, ParameterError, PipelineError

logger = logging.getLogger(__name__)

MONITORED = ("Temp", "LDR", "Gas", "Hum")
_ATTR = {"Temp": "temp_c", "LDR": "ldr_lux", "Gas": "gas_ppm", "Hum": "hum_pct"}


# ---------------------------------------------------------------------------
# thresholds
# ---------------------------------------------------------------------------

def quantile(sorted_values, q):
    """Linear interpolation between order statistics at position ``(n-1)*q``."""
    n = len(sorted_values)
    pos = (n - 1) * q
    lo = int(math.floor(pos))
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    return sorted_values[lo] + (sorted_values[hi] - sorted_values[lo]) * frac


@dataclass(frozen=True)
class FiveNumberSummary:
    min: float
    q1: float
    q2: float
    q3: float
    max: float

    @property
    def iqr(self):
        return self.q3 - self.q1

    @property
    def fence_low(self):
        return self.q1 - 1.5 * self.iqr

    @property
    def fence_high(self):
        return self.q3 + 1.5 * self.iqr

    def to_dict(self):
        return {"min": self.min, "q1": self.q1, "q2": self.q2, "q3": self.q3, "max": self.max,
                "iqr": self.iqr, "fence_low": self.fence_low, "fence_high": self.fence_high}


def five_number_summary(values):
    v = sorted(float(x) for x in values)
    if not v:
        raise InputError("five-number summary of an empty sequence")
    return FiveNumberSummary(v[0], quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75), v[-1])


@dataclass(frozen=True)
class Bound:
    low: float
    high: float
    provenance: str = "manual"

    def __post_init__(self):
        if self.low > self.high:
            raise ParameterError(f"bound low {self.low} exceeds high {self.high}")
        if self.provenance not in ("manual", "derived_from_fences"):
            raise ParameterError(f"unknown provenance {self.provenance!r}")


@dataclass
class ThresholdConfig:
    """Inclusive ``[low, high]`` bounds per sensor column name."""

    bounds: dict = field(default_factory=dict)

    def override(self, sensor, low, high):
        """Copy with a manual bound for ``sensor``."""
        new = dict(self.bounds)
        new[sensor] = Bound(float(low), float(high), "manual")
        return ThresholdConfig(new)

    def to_dict(self):
        return {s: {"low": b.low, "high": b.high, "provenance": b.provenance}
                for s, b in self.bounds.items()}

    @classmethod
    def from_dict(cls, d):
        bounds = {}
        for sensor, b in d.items():
            if sensor not in _ATTR:
                raise InputError(f"unknown sensor {sensor!r} in threshold config")
            bounds[sensor] = Bound(float(b["low"]), float(b["high"]), b.get("provenance", "manual"))
        return cls(bounds)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def derive_thresholds(summaries):
    """Fence-derived bounds from ``{sensor: FiveNumberSummary}``."""
    return ThresholdConfig({
        s: Bound(summary.fence_low, summary.fence_high, "derived_from_fences")
        for s, summary in summaries.items()
    })


def summarize_records(records, sensors=MONITORED):
    return {s: five_number_summary([getattr(r, _ATTR[s]) for r in records]) for s in sensors}


@dataclass(frozen=True)
class AlertEvent:
    timestamp: object
    sensor: str
    value: float
    bound: str  # "low" or "high"
    bound_value: float
    message: str

    def to_dict(self):
        return {
            "timestamp": format_timestamp(self.timestamp),
            "sensor": self.sensor,
            "value": self.value,
            "bound": self.bound,
            "bound_value": self.bound_value,
            "message": self.message,
        }


def check_record(record: SensorRecord, config: ThresholdConfig):
    """One alert per sensor strictly outside its bounds, in Temp, LDR, Gas, Hum order."""
    alerts = []
    for sensor in MONITORED:
        bound = config.bounds.get(sensor)
        value = getattr(record, _ATTR[sensor])
        if bound is None or value is None:
            continue
        if value < bound.low:
            side, limit = "low", bound.low
        elif value > bound.high:
            side, limit = "high", bound.high
        else:
            continue
        word = "below" if side == "low" else "above"
        msg = (f"{sensor} reading {format_number(value)} is {word} the {side} threshold "
               f"{format_number(limit)} at {format_timestamp(record.timestamp)}")
        alerts.append(AlertEvent(record.timestamp, sensor, float(value), side, float(limit), msg))
    return alerts


# ---------------------------------------------------------------------------
# sinks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StreamEvent:
    record: SensorRecord
    detection: str | None = None

    @property
    def time(self):
        return self.record.timestamp


def events_from_records(records):
    """Replay stored rows as events: the person column is the detection, except ``No person``."""
    for r in records:
        person = r.person
        yield StreamEvent(r, None if person in (None, "", NO_PERSON) else person)


@dataclass(frozen=True)
class RetryPolicy:
    retries: int = 2
    backoff: float = 1.0

    def __post_init__(self):
        if self.retries < 0 or self.backoff < 0:
            raise ParameterError("retries and backoff must be >= 0")


class MemorySink:
    """Keeps serialized rows in a list."""

    def __init__(self):
        self.rows = []

    def write(self, record):
        line = record_to_row(record)
        self.rows.append(line)
        return len(line.encode("utf-8"))

    def close(self):
        pass


class CsvFileSink:
    """Appends rows to a CSV file with the sensor header.

    ``write`` returns the bytes it added to the file (the header counts
    towards the first row), so the totals equal the file size.
    """

    def __init__(self, path, retry=RetryPolicy(retries=0, backoff=0.0)):
        self.path = path
        self.retry = retry
        self._fh = open(path, "w", encoding="utf-8", newline="")
        self._header_written = False

    def write(self, record):
        text = record_to_row(record)
        if not self._header_written:
            text = header_line() + text
        attempt = 0
        while True:
            try:
                self._fh.write(text)
                self._fh.flush()
                break
            except OSError:
                attempt += 1
                if attempt > self.retry.retries:
                    raise
                time.sleep(self.retry.backoff)
        self._header_written = True
        return len(text.encode("utf-8"))

    def close(self):
        self._fh.close()


class AlertLog:
    """Line-delimited JSON alert records, to a file or any text stream."""

    def __init__(self, stream=None, path=None):
        self._own = path is not None
        self._fh = open(path, "w", encoding="utf-8") if path is not None else stream
        self.alerts = []

    def emit(self, alert: AlertEvent):
        self.alerts.append(alert)
        if self._fh is not None:
            self._fh.write(json.dumps(alert.to_dict(), sort_keys=True) + "\n")

    def close(self):
        if self._own:
            self._fh.close()


# ---------------------------------------------------------------------------
# cloud push
# ---------------------------------------------------------------------------

DEFAULT_FIELD_MAP = {"field1": "Temp", "field2": "LDR", "field3": "Gas", "field4": "Hum",
                     "field5": "PIR_Yes"}


@dataclass(frozen=True)
class EndpointConfig:
    """Where and how cloud rows are POSTed.

    ``url`` may contain ``{placeholders}`` filled from ``url_params``.
    ``fields`` maps up to eight body field names to sensor columns
    (``Temp``, ``LDR``, ``Gas``, ``Hum``, ``PIR_Yes``, ``Epoch``); the
    detected person travels in ``status_field``.
    """

    url: str
    fields: dict = field(default_factory=lambda: dict(DEFAULT_FIELD_MAP))
    status_field: str = "status"
    url_params: dict = field(default_factory=dict)
    retries: int = 2
    backoff: float = 1.0
    timeout: float = 10.0

    def __post_init__(self):
        if len(self.fields) > 8:
            raise ParameterError("at most 8 numeric fields may be pushed")
        for source in self.fields.values():
            if source not in _FIELD_SOURCES:
                raise ParameterError(f"unknown field source {source!r}")
        RetryPolicy(self.retries, self.backoff)

    @property
    def resolved_url(self):
        return self.url.format(**self.url_params)

    @classmethod
    def from_dict(cls, d):
        known = {"url", "fields", "status_field", "url_params", "retries", "backoff", "timeout"}
        extra = set(d) - known
        if extra:
            raise InputError(f"unknown endpoint keys: {', '.join(sorted(extra))}")
        if "url" not in d:
            raise InputError("endpoint config needs a url")
        return cls(**d)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


_FIELD_SOURCES = {
    "Temp": lambda r: r.temp_c,
    "LDR": lambda r: r.ldr_lux,
    "Gas": lambda r: r.gas_ppm,
    "Hum": lambda r: r.hum_pct,
    "PIR_Yes": lambda r: 1.0 if r.pir == "Yes" else 0.0,
    "Epoch": lambda r: timestamp_to_epoch(r.timestamp),
}


def encode_body(config: EndpointConfig, record: SensorRecord, detection):
    """Form-encoded body; field order follows the config mapping, status last."""
    pairs = [(name, format_number(_FIELD_SOURCES[src](record))) for name, src in config.fields.items()]
    pairs.append((config.status_field, detection or ""))
    pairs.append(("created_at", format_timestamp(record.timestamp)))
    return urllib.parse.urlencode(pairs).encode("utf-8")


def urllib_transport(url, body, timeout):
    """POST ``body``; return the HTTP status code, or 0 when the server is unreachable."""
    req = urllib.request.Request(url, data=body, method="POST",
                                 headers={"Content-Type": "application/x-www-form-urlencoded"})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status
    except urllib.error.HTTPError as exc:
        return exc.code
    except (urllib.error.URLError, OSError):
        return 0


@dataclass(frozen=True)
class DeliveryResult:
    attempts: int
    status: int
    body_bytes: int


def cloud_sink_push(config: EndpointConfig, record: SensorRecord, detection=None,
                    transport=urllib_transport, sleep=time.sleep):
    """POST one row, retrying up to ``config.retries`` times with fixed backoff.

    Any 2xx status counts as delivered.
    """
    body = encode_body(config, record, detection)
    url = config.resolved_url
    status = 0
    for attempt in range(1, config.retries + 2):
        status = transport(url, body, config.timeout)
        if 200 <= status < 300:
            return DeliveryResult(attempt, status, len(body))
        logger.warning("push to %s failed with status %s (attempt %d)", url, status, attempt)
        if attempt <= config.retries:
            sleep(config.backoff)
    raise DeliveryError(f"delivery to {url} failed after {config.retries + 1} attempts "
                        f"(last status {status})", config.retries + 1, status)


class HttpCloudSink:
    def __init__(self, config: EndpointConfig, transport=urllib_transport, sleep=time.sleep):
        self.config = config
        self.transport = transport
        self.sleep = sleep
        self.results = []

    def write(self, record):
        result = cloud_sink_push(self.config, record, record.person, self.transport, self.sleep)
        self.results.append(result)
        return result.body_bytes

    def close(self):
        pass


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

@dataclass
class PipelineStats:
    local_rows: int = 0
    cloud_rows: int = 0
    bytes_local: int = 0
    bytes_cloud: int = 0
    alert_count: int = 0
    skipped_events: int = 0

    @property
    def reduction_ratio(self):
        return 1.0 - self.cloud_rows / self.local_rows if self.local_rows else 0.0

    def to_dict(self):
        return {
            "local_rows": self.local_rows,
            "cloud_rows": self.cloud_rows,
            "bytes_local": self.bytes_local,
            "bytes_cloud": self.bytes_cloud,
            "reduction_ratio": self.reduction_ratio,
            "alert_count": self.alert_count,
            "skipped_events": self.skipped_events,
        }


def run_pipeline(stream: Iterable[StreamEvent], config: ThresholdConfig, local_sink, cloud_sink,
                 alert_sink, sampling_interval=4.0):
    """Replay ``stream`` through the edge filter.

    An event closer than ``sampling_interval`` seconds to the last accepted
    one is skipped. Accepted events go to ``local_sink`` (labelled
    ``No person`` without a detection), to ``cloud_sink`` when a person was
    detected, and through :func:`check_record` into ``alert_sink``.
    """
    if not sampling_interval > 0:
        raise ParameterError("sampling_interval must be > 0")
    gap = timedelta(seconds=sampling_interval)
    stats = PipelineStats()
    previous = None
    last_accepted = None
    for event in stream:
        ts = event.time
        if previous is not None and ts < previous:
            raise OutOfOrderError(previous, ts)
        previous = ts
        if last_accepted is not None and ts - last_accepted < gap:
            stats.skipped_events += 1
            continue
        last_accepted = ts

        person = event.detection if event.detection else NO_PERSON
        row = replace(event.record, person=person)
        try:
            stats.bytes_local += local_sink.write(row)
            stats.local_rows += 1
            if event.detection:
                stats.bytes_cloud += cloud_sink.write(row)
                stats.cloud_rows += 1
        except (OSError, DeliveryError) as exc:
            raise PipelineError(f"sink write failed at {format_timestamp(ts)}: {exc}", stats) from exc

        for alert in check_record(row, config):
            alert_sink.emit(alert)
            stats.alert_count += 1
    return stats

