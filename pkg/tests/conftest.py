import hypothesis
import numpy as np
import pytest

from panelbreak.dgp import ErrorModel, simulate_panel
from panelbreak.limitdist import CritTableCache

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=5)
hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.register_profile("debugger", report_multiple_bugs=False)
hypothesis.settings.load_profile("ci")


@pytest.fixture
def cache(tmp_path):
    return CritTableCache(tmp_path / "crit")


@pytest.fixture
def iid_panel():
    panel, _ = simulate_panel(ErrorModel.ar1(0.0), 50, 100, seed=11)
    return panel


@pytest.fixture
def ar_panel():
    panel, _ = simulate_panel(ErrorModel.ar1(0.3), 30, 80, seed=5)
    return panel
