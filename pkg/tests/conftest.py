
import numpy as np
import pytest

from locmon import synth
from locmon.dataset import dump_records

# first rows of a real capture, used as a fixed fixture
SAMPLE_CSV = """Person,Temp,LDR,Gas,PIR,Hum,Timestamp
Ajitkumar,26,299.4,0.11,No,66.86,2018-09-13 10:59:19.319301
Ajitkumar,26,277.2,0.1,Yes,66,2018-09-13 10:59:25.436754
Ajitkumar,26,296.3,0.1,No,67,2018-09-13 10:59:31.036016
Ajitkumar,26,291.05,0.1,Yes,67,2018-09-13 10:59:41.162160
Ajitkumar,26,280,0.1,No,67,2018-09-13 10:59:46.225767
Ajitkumar,26,273.2,0.1,Yes,67,2018-09-13 10:59:51.290994
Swaroop,26,266.57,0.11,Yes,66.91,2018-09-13 11:03:06.093508
Swaroop,26,261.15,0.12,No,66.75,2018-09-13 11:03:24.441326
Swaroop,26,260,0.13,Yes,67,2018-09-13 11:03:29.496944
Unknown,26,260.2,0.14,No,67,2018-09-13 11:03:47.653924
Yogita,26,261.1,0.14,Yes,66,2018-09-13 11:03:53.520794
Yogita,26,260,0.14,Yes,66,2018-09-13 11:03:58.639831
"""


@pytest.fixture
def sample_text():
    return SAMPLE_CSV


@pytest.fixture
def sample_csv(tmp_path):
    path = tmp_path / "sample.csv"
    path.write_text(SAMPLE_CSV, encoding="utf-8")
    return path


@pytest.fixture
def separable_csv(tmp_path):
    path = tmp_path / "separable.csv"
    path.write_text(dump_records(synth.separable(300, seed=3)), encoding="utf-8")
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance summary: one line per criterion ---------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _CRITERIA.setdefault(number, {"title": title, "passed": True, "seconds": 0.0, "ran": False})
    if call.when == "call":
        entry["ran"] = True
        entry["seconds"] += call.duration
    if call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception):
        entry["passed"] = False


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        status = "PASS" if e["passed"] and e["ran"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}  {status}  {e['title']}  ({e['seconds']:.2f} s)")
