"""Shared fixtures."""

from __future__ import annotations

import pytest

from helpers import RUNNING_EXAMPLE, running_example


@pytest.fixture
def running():
    return running_example()


@pytest.fixture
def running_path():
    return str(RUNNING_EXAMPLE)
