import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_criteria = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, description = marker.args
    entry = _criteria.setdefault(number, {"description": description, "status": "PASS", "detail": ""})
    if call.excinfo is not None:
        if call.excinfo.errisinstance(pytest.skip.Exception):
            if entry["status"] == "PASS":
                entry["status"] = "SKIP"
                entry["detail"] = str(call.excinfo.value)
        else:
            entry["status"] = "FAIL"
            entry["detail"] = item.name


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        line = f"criterion {number:>2}: {e['status']:<4} {e['description']}"
        if e["detail"]:
            line += f"  ({e['detail']})"
        terminalreporter.write_line(line)
