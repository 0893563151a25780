import pytest

_outcomes: dict[str, list[tuple[str, str]]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    rep = (yield).get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        label = str(mark.args[0])
        _outcomes.setdefault(label, []).append((item.name, rep.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for label in sorted(_outcomes, key=lambda s: (int(s.split()[0]), s)):
        results = _outcomes[label]
        ok = all(o == "passed" for _, o in results)
        names = ", ".join(n for n, _ in results)
        tr.write_line(f"criterion {label}: {'PASS' if ok else 'FAIL'} ({names})")
