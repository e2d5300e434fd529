"""Acceptance reporting: one PASS/FAIL line per criterion after the run."""

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion this test checks")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call":
        return
    num, title = mark.args
    entry = _CRITERIA.setdefault(num, {"title": title, "ok": True, "notes": []})
    if call.excinfo is not None:
        entry["ok"] = False
        msg = str(call.excinfo.value).strip().splitlines()
        entry["notes"].append(f"{item.name}: {msg[0] if msg else call.excinfo.typename}")
    for key, value in item.user_properties:
        if key == "measured":
            entry["notes"].append(value)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        e = _CRITERIA[num]
        tr.write_line(f"criterion {num:2d} {'PASS' if e['ok'] else 'FAIL'}  {e['title']}")
        for note in e["notes"]:
            tr.write_line(f"    {note}")
