import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line for an acceptance criterion and assert it."""

    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        request.config.stash[ACCEPTANCE].append(line)
        assert ok, line

    return record


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_world(tmp_path_factory):
    """The tiny synthetic corpus and log on disk, plus a fast pipeline config."""
    from phrec.synthetic import generate, overfit_config

    paths = generate(overfit_config(0)).save(tmp_path_factory.mktemp("world"))
    cfg = {
        "articles": str(paths["articles"]),
        "events": str(paths["events"]),
        "dim": 8,
        "glove_epochs": 3,
        "min_freq": 3,
        "vocab_min_count": 1,
        "models": ["textcnn"],
        "ranker": {"epochs": 2},
    }
    return paths, cfg
