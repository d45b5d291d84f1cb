"""Shared fixtures: temporary run directories and a CLI invoker."""
from __future__ import annotations

import subprocess
import sys

import pytest


@pytest.fixture
def run_cli():
    """Invoke the installed CLI in a subprocess, returning CompletedProcess."""

    def invoke(*args: str, cwd=None):
        return subprocess.run(
            [sys.executable, "-m", "spiketile", *map(str, args)],
            capture_output=True, text=True, cwd=cwd)

    return invoke
