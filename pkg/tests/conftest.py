from __future__ import annotations

import json
from importlib import resources

import jsonschema
import numpy as np
import pytest
from hypothesis import settings

# property tests replay the same examples on every run
settings.register_profile("repro", derandomize=True, print_blob=True)
settings.load_profile("repro")

# (criterion, passed, detail) lines recorded by test_acceptance.py
ACCEPTANCE_LINES: list[tuple[int, bool, str]] = []


def record_acceptance(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append((criterion, bool(passed), detail))
    print(format_acceptance(criterion, passed, detail))


def format_acceptance(criterion: int, passed: bool, detail: str) -> str:
    return f"[{'PASS' if passed else 'FAIL'}] criterion {criterion:>2}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(ACCEPTANCE_LINES, key=lambda t: t[0]):
        terminalreporter.write_line(format_acceptance(criterion, passed, detail))


def load_schema(name: str) -> dict:
    text = resources.files("volbreak").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(obj, name: str) -> None:
    jsonschema.validate(obj, load_schema(name))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_prices(path, returns, start_price=100.0, with_dates=True):
    """Write a ``date,close`` CSV whose log returns are ``returns``."""
    prices = start_price * np.exp(np.concatenate([[0.0], np.cumsum(returns)]))
    lines = ["date,close" if with_dates else "close"]
    for i, p in enumerate(prices):
        day = np.datetime64("2000-01-03") + np.timedelta64(i, "D")
        lines.append(f"{day},{float(p)!r}" if with_dates else repr(float(p)))
    path.write_text("\n".join(lines) + "\n")
    return path
