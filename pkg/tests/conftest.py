"""
Shared fixtures and Hypothesis strategies.
"""

from pathlib import Path

import pytest
from hypothesis import strategies as st

from lazytime.astcore import (
    Assign, Binary, If, IntLit, Ok, Print, Scalar, Stop, Universe, Var, flatten_seq, seq,
)
from lazytime.parser import parse_program, parse_spec

SAMPLES = Path(__file__).resolve().parent.parent / "samples"

NAMES = ("x", "y", "z")


def sample(name: str) -> Path:
    return SAMPLES / name


def first_stmt(text: str):
    """The first statement of a program text (stop is appended if missing)."""
    return flatten_seq(parse_program(text))[0]


def scalars(*names: str, bound: int = 2) -> Universe:
    return Universe(frozenset(names), frozenset(), bound)


@pytest.fixture
def factorial3():
    return parse_program(sample("factorial3.imp").read_text())


@pytest.fixture
def loop_spec():
    return parse_spec(sample("loop.spec").read_text())


@pytest.fixture
def intro():
    return parse_program(sample("intro.imp").read_text())


# ---------------------------------------------------------------------------
# Random loop-free programs over x, y, z
# ---------------------------------------------------------------------------

variables = st.sampled_from(NAMES).map(Var)
literals = st.integers(min_value=0, max_value=3).map(IntLit)

expressions = st.recursive(
    variables | literals,
    lambda inner: st.builds(Binary, st.sampled_from(["+", "-"]), inner, inner),
    max_leaves=4,
)

conditions = st.builds(Binary, st.sampled_from(["=", "<", "!="]), expressions, expressions)

assignments = st.builds(Assign, st.sampled_from(NAMES).map(Scalar), expressions)

statements = st.recursive(
    st.just(Ok()) | assignments,
    lambda inner: (
        st.lists(inner, min_size=2, max_size=3).map(lambda parts: seq(*parts))
        | st.builds(If, conditions, inner, inner)
    ),
    max_leaves=6,
)


@st.composite
def programs(draw):
    """A loop-free statement followed by a print of one variable and stop."""
    body = draw(statements)
    shown = draw(variables)
    return seq(body, Print(shown), Stop())
