import numpy as np
import pytest

import topic_trends.lda

# Every model trained anywhere in the suite passes through this check.
TRAINED_MODELS = []
ROW_SUM_TOL = 1e-9

# test_acceptance records (criterion, description, passed) here for the summary.
ACCEPTANCE_RESULTS = []

_real_train = topic_trends.lda.train


def assert_normalized(model):
    assert np.all(np.abs(model.phi.sum(axis=1) - 1.0) <= ROW_SUM_TOL), "phi rows do not sum to 1"
    assert np.all(np.abs(model.theta.sum(axis=1) - 1.0) <= ROW_SUM_TOL), "theta rows do not sum to 1"


def _checked_train(*args, **kwargs):
    model = _real_train(*args, **kwargs)
    assert_normalized(model)
    TRAINED_MODELS.append((model.K, model.V, model.theta.shape[0]))
    return model


# Installed before any test module (or the CLI) binds the name, so that
# ``from topic_trends.lda import train`` everywhere picks up the checked version.
topic_trends.lda.train = _checked_train

import topic_trends.cli  # noqa: E402
from topic_trends.corpus import TweetRecord, parse_timestamp  # noqa: E402

assert topic_trends.cli.train is _checked_train


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, text, passed in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {text}")
    if TRAINED_MODELS:
        terminalreporter.write_line(f"(normalization checked on {len(TRAINED_MODELS)} trained models)")


def rec(rid, stamp, text="hello world", lang="en", rt=False):
    return TweetRecord(rid, parse_timestamp(stamp), text, lang, rt)


@pytest.fixture
def make_record():
    return rec


@pytest.fixture(scope="session")
def demo_bundle(tmp_path_factory):
    """One full ``report`` run of the demo config on the bundled corpus."""
    from pathlib import Path

    out = tmp_path_factory.mktemp("demo_bundle")
    cfg = Path(__file__).parents[1] / "configs" / "demo.cfg"
    assert topic_trends.cli.main(["report", "--config", str(cfg), "--out-dir", str(out)]) == 0
    return out
