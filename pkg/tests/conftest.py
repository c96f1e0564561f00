from functools import lru_cache

import pytest

from eacq.codes import load_code


@lru_cache(maxsize=None)
def cached_code(spec: str):
    """Codes are immutable once built, so tests share one instance per spec."""
    return load_code(spec)


@pytest.fixture
def code_by_spec():
    return cached_code


_ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_LINES] = []


@pytest.fixture
def acceptance_log(request):
    """Record one ``PASS``/``FAIL`` line per acceptance criterion for the terminal summary."""
    lines = request.config.stash[_ACCEPTANCE_LINES]

    def record(number: int, title: str, ok: bool, seconds: float, budget: float, detail: str = "") -> bool:
        ok = ok and seconds < budget
        status = "PASS" if ok else "FAIL"
        text = f"{status} criterion {number:>2} {title}: {detail} [{seconds:.2f} s, budget {budget:g} s]"
        lines.append((number, text))
        print(text)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, text in sorted(lines):
            terminalreporter.write_line(text)
