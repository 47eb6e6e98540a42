import json

import pytest

from cryptocast import data as dataio


@pytest.fixture(scope="session")
def small_csv(tmp_path_factory):
    """Deterministic 300-row synthetic price CSV shared across tests."""
    path = tmp_path_factory.mktemp("fixtures") / "series.csv"
    frame = dataio.synthesize_series(
        11, 300,
        dataio.SynthParams(drift=0.0, volatility=0.004, price_cycle=0.035,
                           cycle_period=40.0, fgi_noise=1.5),
    )
    dataio.write_series_csv(frame, path)
    return str(path)


@pytest.fixture()
def small_config_doc(small_csv, tmp_path):
    """Fast-running full-experiment config against the shared CSV."""
    return {
        "data": {"path": small_csv, "scenario": "bitcoin"},
        "window": 5,
        "seed": 77,
        "split_ratio": 0.8,
        "output_dir": str(tmp_path / "out"),
        "models": {
            "rbfn": {"centers": 8},
            "grnn": {"sigma_grid": [0.03, 0.1, 0.3]},
            "bilstm": {"hidden_size": 6, "epochs": 15, "lr": 0.01},
            "bigru": {"hidden_size": 6, "epochs": 15, "lr": 0.01},
            "hybrid": {"d_model": 8, "heads": 2, "layers": 1, "d_ffn": 16,
                       "d_gru": 8, "epochs": 15, "lr": 0.01},
        },
    }


@pytest.fixture()
def small_config_file(small_config_doc, tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(small_config_doc))
    return str(path)
