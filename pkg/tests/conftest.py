import numpy as np
import pytest

from spectral_risk.market_data import ReturnPanel, panel_to_csv
from spectral_risk.synthetic import RegimeSpec, regime_panel


@pytest.fixture(scope="session")
def small_panel():
    rng = np.random.default_rng(2020)
    t, n = 90, 8
    factor = rng.normal(0, 0.01, (t, 1))
    values = 0.6 * factor + rng.normal(0, 0.01, (t, n))
    return ReturnPanel(tuple(f"2020-{i:04d}" for i in range(t)), tuple(f"S{j}" for j in range(n)), values)


@pytest.fixture(scope="session")
def regime():
    return regime_panel(0, RegimeSpec(n_days=400, calm_block=120, crash_block=60))


@pytest.fixture
def panel_csv(tmp_path, small_panel):
    path = tmp_path / "returns.csv"
    path.write_text(panel_to_csv(small_panel))
    return path
