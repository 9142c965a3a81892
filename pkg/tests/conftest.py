from importlib import resources

import pytest

from epdta import automaton as A
from epdta.solemodel import reduced_sole_model

SMALL_MODELS = ("minimal", "fig1", "chain03", "race", "counter", "sole2")

_acceptance_lines: list = []


def shipped(name: str) -> A.Epdta:
    return A.load_file(str(resources.files("epdta") / "models" / f"{name}.epdta"))


def shipped_text(name: str) -> str:
    return (resources.files("epdta") / "models" / f"{name}.epdta").read_text(encoding="utf-8")


@pytest.fixture
def fig1():
    return shipped("fig1")


@pytest.fixture
def chain03():
    return shipped("chain03")


@pytest.fixture(scope="session")
def sole2():
    return reduced_sole_model()


def record_acceptance(line: str) -> None:
    _acceptance_lines.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
