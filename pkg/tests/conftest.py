import pytest

from bergman_extremal import make_eval_grid

# criterion number -> (title, list of (check name, passed))
_CRITERIA: dict[int, tuple[str, list]] = {}


class CriterionRecorder:
    def __init__(self, number: int, title: str):
        self.number = number
        _CRITERIA.setdefault(number, (title, []))

    def check(self, name: str, ok: bool, detail: str = "") -> bool:
        _CRITERIA[self.number][1].append((name, bool(ok), detail))
        return bool(ok)


@pytest.fixture
def criterion():
    return CriterionRecorder


@pytest.fixture(scope="session")
def grid():
    return make_eval_grid(8, 16)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, checks = _CRITERIA[number]
        ok = bool(checks) and all(c[1] for c in checks)
        tr.write_line(f"criterion {number} ({title}): {'PASS' if ok else 'FAIL'}")
        for name, passed, detail in checks:
            if not passed:
                tr.write_line(f"    failed: {name} {detail}".rstrip())
