import numpy as np
import pytest

from nepmcnn.preprocess import load_config
from nepmcnn.synthetic import SyntheticSpec, make_synthetic, write_synthetic


@pytest.fixture(scope="session")
def pre_config():
    return load_config()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_synthetic_files(tmp_path_factory, pre_config):
    """A 3 x 60 tweet corpus and its embedding file on disk."""
    d = tmp_path_factory.mktemp("synthetic")
    return write_synthetic(d, SyntheticSpec(n_per_class=60, content_pool=200, seed=7), pre_config)


@pytest.fixture(scope="session")
def synthetic_data(pre_config):
    return make_synthetic(SyntheticSpec(n_per_class=60, content_pool=200, seed=7), pre_config)


# acceptance results, printed as one line per criterion at the end of the run
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n}. {name}: {detail}")
