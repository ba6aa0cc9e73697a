import sys
from importlib import resources

import pytest

from bubblefl.parser import Program, parse_sources

sys.setrecursionlimit(20000)


def prelude_text() -> str:
    return resources.files("bubblefl").joinpath("prelude.fl").read_text("utf-8")


@pytest.fixture(scope="session")
def prelude() -> Program:
    return parse_sources([("<prelude>", prelude_text())])


def parse_with_prelude(extra: str) -> Program:
    return parse_sources([("<prelude>", prelude_text()), ("<test>", extra)])
