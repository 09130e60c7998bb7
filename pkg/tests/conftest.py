"""Acceptance bookkeeping: tests record per-criterion outcomes, the summary prints them."""

import pytest

CRITERIA = {
    1: "maximal-operator exponent at L=12",
    2: "sparse domination a-posteriori checks",
    3: "Carleson <-> sparse equivalence",
    4: "local decay envelopes",
    5: "oscillation comparison",
    6: "auxiliary inequality suites",
    7: "C_p suites and profiles",
    8: "mixed A_p / A_inf buckets",
    9: "determinism of manifest hashes",
}

_RESULTS: dict = {}


class Recorder:
    def record(self, criterion: int, part: str, ok: bool, detail: str = "") -> bool:
        _RESULTS.setdefault(criterion, []).append((part, bool(ok), detail))
        return bool(ok)


@pytest.fixture(scope="session")
def acceptance():
    return Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, title in CRITERIA.items():
        parts = _RESULTS.get(n)
        if not parts:
            tr.write_line(f"NOT RUN  {n}. {title}")
            continue
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{p}{'' if ok else ' [fail]'}{': ' + d if d else ''}" for p, ok, d in parts)
        tr.write_line(f"{status}     {n}. {title} | {detail}")


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance criteria on the default configuration")
