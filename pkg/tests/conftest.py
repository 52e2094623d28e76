import socket
from collections import defaultdict
from pathlib import Path

import pytest

from techlens import load_corpus
from techlens.techdict import load_demo_dictionary

FIXTURES = Path(__file__).parent / "fixtures"
REPLAY = FIXTURES / "replay"
SCHEMA = FIXTURES / "schema"
ENDPOINT = "https://medium.example"


@pytest.fixture(scope="session")
def demo_dict():
    return load_demo_dictionary()


@pytest.fixture(scope="session")
def corpus12():
    return load_corpus(FIXTURES / "corpus12.jsonl", source_tag="covid-19")


@pytest.fixture(scope="session")
def corpus50():
    return load_corpus(FIXTURES / "corpus50.jsonl", source_tag="covid-19")


@pytest.fixture(scope="session")
def extraction20():
    return load_corpus(FIXTURES / "extraction20.jsonl")


@pytest.fixture
def no_network(monkeypatch):
    """Fail any attempt to open a socket connection; count the attempts."""
    attempts = []

    def refuse(self, address, *args, **kwargs):
        attempts.append(address)
        raise OSError(f"network access blocked in tests: {address}")

    monkeypatch.setattr(socket.socket, "connect", refuse)
    monkeypatch.setattr(socket.socket, "connect_ex", refuse)
    monkeypatch.setattr(socket, "create_connection", lambda address, *a, **k: refuse(None, address))
    return attempts


# --- acceptance summary ---------------------------------------------------------

_criteria: dict[int, str] = {}
_outcomes: dict[int, list[bool]] = defaultdict(list)


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("acceptance")
        if marker is not None:
            number, title = marker.args
            _criteria[number] = title
            item.user_properties.append(("acceptance", number))


def pytest_runtest_logreport(report):
    number = dict(report.user_properties).get("acceptance")
    if number is None:
        return
    if report.when == "call" or report.failed:
        _outcomes[number].append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        results = _outcomes.get(number, [])
        ok = bool(results) and all(results)
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"AC{number} {status}  {_criteria[number]}")
