import logging

import pytest

from reinforced.weights import Family, WeightProfile


@pytest.fixture
def unit_profile() -> WeightProfile:
    """LogPoly with delta = 1: w0(0) = w0(1) = 1, the profile of the hand-worked examples."""
    return WeightProfile(family=Family.LOG_POLY, alpha=0.5, beta=1.0, delta=1.0)


@pytest.fixture
def flat_walk() -> WeightProfile:
    """w0 == 1 and no reinforcement: the reflected simple random walk."""
    return WeightProfile(family=Family.TAKEI_POLY, alpha=0.0, delta=0.0)


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    out = tmp_path / "runs"
    monkeypatch.setenv("REINFORCED_OUTPUT_DIR", str(out))
    return out


@pytest.fixture(autouse=True)
def reset_package_logger():
    """The CLI detaches the package logger from root; reattach it so caplog sees records."""
    yield
    logger = logging.getLogger("reinforced")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    logger.setLevel(logging.NOTSET)
    logger.propagate = True
