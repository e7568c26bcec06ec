"""
Pytest configuration and shared fixtures for rdbn tests.
"""

import pytest
import sys
from pathlib import Path

# Ensure src/python is in path
src_path = Path(__file__).parent.parent / "src" / "python"
if str(src_path) not in sys.path:
    sys.path.insert(0, str(src_path))


@pytest.fixture
def chain_frame():
    """n=200 rows from a -> b -> c with unit-scale noise."""
    import numpy as np
    import pandas as pd

    rng = np.random.default_rng(42)
    a = rng.normal(0.0, 1.0, 200)
    b = 2.0 * a + rng.normal(0.0, 0.5, 200)
    c = -1.5 * b + rng.normal(0.0, 0.5, 200)
    return pd.DataFrame({"a": a, "b": b, "c": c})


@pytest.fixture
def mimic_spec():
    """Study-shaped truth with 10% MCAR missingness, n=120."""
    from rdbn.synthetic import study_mimic_scenario

    return study_mimic_scenario(n=120, missing_rate=0.1, seed=7)


@pytest.fixture
def small_dataset():
    """Six countries over Y and three years with two missing cells."""
    import numpy as np
    import pandas as pd
    from rdbn.data_pipeline import MergedDataset

    frame = pd.DataFrame(
        {
            "Y": [400.0, 450.0, 500.0, 420.0, 480.0, 510.0],
            "X1997": [10.0, 11.0, 12.0, 10.5, np.nan, 12.2],
            "X1998": [10.1, 11.2, 12.1, 10.4, 11.6, 12.4],
            "X1999": [10.3, np.nan, 12.3, 10.6, 11.8, 12.5],
        },
        index=["AAA", "BBB", "CCC", "DDD", "EEE", "FFF"],
    )
    return MergedDataset.from_frame(frame)


@pytest.fixture
def temp_out_dir(tmp_path):
    """Provide a temporary output directory for run artifacts."""
    out = tmp_path / "run"
    out.mkdir()
    return str(out)
