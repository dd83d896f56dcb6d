import io
import json
import threading
import urllib.parse
from datetime import datetime, timedelta
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from locmon import synth
from locmon.dataset import NO_PERSON, SensorRecord, parse_records
from locmon.errors import DeliveryError, OutOfOrderError, ParameterError, PipelineError
from locmon.monitor import (
    AlertLog,
    Bound,
    CsvFileSink,
    EndpointConfig,
    HttpCloudSink,
    MemorySink,
    StreamEvent,
    ThresholdConfig,
    check_record,
    cloud_sink_push,
    derive_thresholds,
    encode_body,
    events_from_records,
    five_number_summary,
    quantile,
    run_pipeline,
    summarize_records,
    urllib_transport,
)

T0 = datetime(2018, 9, 13, 11, 0, 0)


def rec(seconds, temp=26.0, person="A", ldr=250.0):
    return SensorRecord(person, temp, ldr, 0.1, "No", 60.0, T0 + timedelta(seconds=seconds))


# thresholds ----------------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50), st.floats(0, 1))
def test_quantile_matches_numpy(values, q):
    got = quantile(sorted(values), q)
    assert got == pytest.approx(np.quantile(values, q, method="linear"), rel=1e-12, abs=1e-9)


def test_five_number_summary_and_fences():
    s = five_number_summary([1, 2, 3, 4, 5, 6, 7, 8, 9])
    assert (s.min, s.q1, s.q2, s.q3, s.max) == (1, 3, 5, 7, 9)
    assert (s.fence_low, s.fence_high) == (-3.0, 13.0)


def test_derived_bounds_raise_no_alerts_on_inliers():
    records = synth.separable(300, seed=1) + [rec(10_000, temp=90.0)]
    config = derive_thresholds(summarize_records(records))
    summaries = summarize_records(records)
    for r in records:
        alerts = check_record(r, config)
        inlier = all(summaries[s].fence_low <= r.value(s) <= summaries[s].fence_high
                     for s in ("Temp", "LDR", "Gas", "Hum"))
        assert (not alerts) == inlier
    assert check_record(records[-1], config)[0].bound == "high"


def test_check_record_boundaries_inclusive():
    config = ThresholdConfig({"Temp": Bound(20.0, 30.0)})
    assert check_record(rec(0, temp=30.0), config) == []
    (alert,) = check_record(rec(0, temp=30.5), config)
    assert alert.sensor == "Temp" and alert.bound_value == 30.0 and "above" in alert.message
    assert check_record(rec(0, temp=19.0), config)[0].bound == "low"


def test_threshold_config_round_trip_and_override():
    config = ThresholdConfig({"Temp": Bound(20.0, 30.0, "derived_from_fences")})
    config = config.override("Hum", 10, 90)
    again = ThresholdConfig.from_dict(json.loads(json.dumps(config.to_dict())))
    assert again == config
    assert again.bounds["Hum"].provenance == "manual"
    with pytest.raises(ParameterError):
        Bound(2.0, 1.0)


# pipeline ------------------------------------------------------------------

def test_pipeline_reduction_ratio_exact(tmp_path):
    records = synth.detection_stream(1000, seed=5, detection_rate=0.3)
    local = CsvFileSink(tmp_path / "local.csv")
    cloud = CsvFileSink(tmp_path / "cloud.csv")
    alerts = AlertLog(path=tmp_path / "alerts.jsonl")
    stats = run_pipeline(events_from_records(records), ThresholdConfig(), local, cloud, alerts)
    for s in (local, cloud, alerts):
        s.close()
    assert stats.local_rows == 1000 and stats.cloud_rows == 300
    assert stats.reduction_ratio == 0.7
    assert stats.bytes_local == (tmp_path / "local.csv").stat().st_size
    assert stats.bytes_cloud == (tmp_path / "cloud.csv").stat().st_size
    cloud_rows = parse_records((tmp_path / "cloud.csv").read_text())
    assert [r.timestamp for r in cloud_rows] == [r.timestamp for r in records if r.person != NO_PERSON]
    assert all(r.person != NO_PERSON for r in cloud_rows)


def test_sampling_gate_skips_close_events():
    events = [StreamEvent(rec(s), "A") for s in (0, 1, 3.9, 4, 5, 8.5, 12)]
    local, cloud = MemorySink(), MemorySink()
    stats = run_pipeline(events, ThresholdConfig(), local, cloud, AlertLog(), sampling_interval=4.0)
    assert stats.local_rows == 3  # 0, 4, 8.5 ; 12 is 3.5 s after 8.5
    assert stats.skipped_events == 4


def test_pipeline_labels_missing_detection():
    local, cloud = MemorySink(), MemorySink()
    run_pipeline([StreamEvent(rec(0), None), StreamEvent(rec(4), "Yogita")], ThresholdConfig(),
                 local, cloud, AlertLog())
    assert local.rows[0].startswith("No person,")
    assert len(cloud.rows) == 1 and cloud.rows[0].startswith("Yogita,")


def test_pipeline_alerts_written_as_json_lines():
    buf = io.StringIO()
    config = ThresholdConfig({"Temp": Bound(0.0, 30.0)})
    stats = run_pipeline([StreamEvent(rec(0, temp=35.0), "A")], config, MemorySink(), MemorySink(),
                         AlertLog(stream=buf))
    assert stats.alert_count == 1
    line = json.loads(buf.getvalue())
    assert line["sensor"] == "Temp" and line["bound"] == "high"


def test_pipeline_rejects_out_of_order():
    with pytest.raises(OutOfOrderError):
        run_pipeline([StreamEvent(rec(8)), StreamEvent(rec(4))], ThresholdConfig(),
                     MemorySink(), MemorySink(), AlertLog())
    with pytest.raises(ParameterError):
        run_pipeline([], ThresholdConfig(), MemorySink(), MemorySink(), AlertLog(), sampling_interval=0)


# cloud push ------------------------------------------------------------------

def test_encode_body_order():
    config = EndpointConfig(url="http://x/{key}", url_params={"key": "K"})
    body = urllib.parse.parse_qsl(encode_body(config, rec(0), "Yogita").decode())
    assert [k for k, _ in body] == ["field1", "field2", "field3", "field4", "field5", "status", "created_at"]
    assert dict(body)["status"] == "Yogita" and dict(body)["field1"] == "26"
    assert config.resolved_url == "http://x/K"


def test_endpoint_config_validation():
    with pytest.raises(ParameterError):
        EndpointConfig(url="u", fields={f"f{i}": "Temp" for i in range(9)})
    with pytest.raises(ParameterError):
        EndpointConfig(url="u", fields={"f": "Pressure"})


def test_push_retries_then_fails():
    calls, sleeps = [], []

    def transport(url, body, timeout):
        calls.append(url)
        return 503

    config = EndpointConfig(url="http://stub", retries=2, backoff=0.5)
    with pytest.raises(DeliveryError) as info:
        cloud_sink_push(config, rec(0), "A", transport, sleeps.append)
    assert len(calls) == 3 and sleeps == [0.5, 0.5]
    assert info.value.attempts == 3 and info.value.last_status == 503


class _Stub(BaseHTTPRequestHandler):
    responses = []
    bodies = []

    def do_POST(self):
        self.bodies.append(self.rfile.read(int(self.headers["Content-Length"])))
        code = self.responses.pop(0) if self.responses else 200
        self.send_response(code)
        self.end_headers()

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    _Stub.responses, _Stub.bodies = [500], []
    server = HTTPServer(("127.0.0.1", 0), _Stub)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/update"
    server.shutdown()
    server.server_close()


def test_http_sink_against_stub(stub_server):
    config = EndpointConfig(url=stub_server, retries=2, backoff=0.0)
    sink = HttpCloudSink(config)
    n = sink.write(rec(0, person="Swaroop"))
    assert sink.results[0].attempts == 2 and sink.results[0].status == 200
    assert n == len(_Stub.bodies[-1])
    assert b"status=Swaroop" in _Stub.bodies[-1]


def test_unreachable_endpoint_returns_zero():
    assert urllib_transport("http://127.0.0.1:9/", b"x", 0.5) == 0


def test_pipeline_wraps_delivery_failure():
    config = EndpointConfig(url="http://stub", retries=0, backoff=0.0)
    sink = HttpCloudSink(config, transport=lambda *a: 0, sleep=lambda s: None)
    with pytest.raises(PipelineError) as info:
        run_pipeline([StreamEvent(rec(0), "A")], ThresholdConfig(), MemorySink(), sink, AlertLog())
    # the local store already holds the row; the cloud count stays behind
    assert info.value.stats.local_rows == 1 and info.value.stats.cloud_rows == 0
