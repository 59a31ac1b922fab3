"""Shared fixtures: parsed domain, demo problem, fixture paths."""

from __future__ import annotations

from pathlib import Path

import pytest

from affplan.pddl import parse_domain, parse_problem

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def domain_text() -> str:
    return (FIXTURES / "manipulation.pddl").read_text()


@pytest.fixture(scope="session")
def domain(domain_text):
    return parse_domain(domain_text)


@pytest.fixture(scope="session")
def tabletop_problem(domain):
    text = (FIXTURES / "problems" / "tabletop.pddl").read_text()
    return parse_problem(text, domain)
