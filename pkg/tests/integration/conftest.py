#!/usr/bin/env python3
# Copyright 2026 Canonical Ltd.
# See LICENSE file for licensing details.

import pytest

from optimizer import OptimizerConfig


def pytest_addoption(parser: pytest.Parser) -> None:
    """Add options to the pytest command line.

    This is a pytest hook that is called when the pytest command line is being parsed.

    Args:
      parser: The pytest command line parser.
    """
    parser.addoption(
        "--max_evals",
        action="store",
        type=int,
        default=4000,
        help="Objective evaluations per optimization run",
    )
    parser.addoption(
        "--workers", action="store", type=int, default=1, help="Threads for multi-start runs"
    )
    parser.addoption("--seed", action="store", type=int, default=0, help="Seed for every run")


def pytest_configure(config: pytest.Config) -> None:
    """Validate the options provided by the user.

    This is a pytest hook that is called after command line options have been parsed.

    Args:
      config: The pytest configuration object.
    """
    if config.getoption("--max_evals") < 1:
        pytest.exit("The --max_evals option must be positive. Tests aborted.")
    if config.getoption("--workers") < 1:
        pytest.exit("The --workers option must be positive. Tests aborted.")


@pytest.fixture(scope="session")
def optimizer_config(request) -> OptimizerConfig:
    """Return the optimizer settings shared by every acceptance run."""
    return OptimizerConfig(
        max_evals=request.config.getoption("--max_evals"),
        workers=request.config.getoption("--workers"),
        seed=request.config.getoption("--seed"),
    )
