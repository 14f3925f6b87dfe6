import numpy as np
import pandas as pd
import pytest

from data.atom_grid import GRID_COLUMNS, load_atom_grid, tabulate_model, write_atom_grid
from models.errors import DomainError
from models.surface_model import DEFAULT_ATOM_MODEL, SurfaceConfig, SurfaceGeometry, beam_pattern

VOLTS = np.linspace(0.0, 16.0, 9)
FREQS = [25.5, 26.0, 26.5]


@pytest.fixture
def grid_file(tmp_path):
    path = tmp_path / "atom.csv"
    write_atom_grid(tabulate_model(DEFAULT_ATOM_MODEL, VOLTS, VOLTS, FREQS), path)
    return path


def test_measured_grid_reproduces_samples(grid_file):
    model = load_atom_grid(grid_file)
    assert model.band == (25.5, 26.5)
    c_t, c_r = model.coefficients([2.0, 8.0], [14.0, 6.0], 26.0)
    ref_t, ref_r = DEFAULT_ATOM_MODEL.coefficients(np.array([2.0, 8.0]), np.array([14.0, 6.0]), 26.0)
    assert np.allclose(c_t, ref_t)
    assert np.allclose(c_r, ref_r)


def test_interpolated_values_stay_passive(grid_file):
    model = load_atom_grid(grid_file)
    u = np.linspace(0.0, 16.0, 23)
    um, ue = np.meshgrid(u, u)
    c_t, c_r = model.coefficients(um, ue, 25.8)
    assert np.all(np.abs(c_t) ** 2 + np.abs(c_r) ** 2 <= 1.0 + 1e-9)


def test_measured_model_drives_beam_pattern(grid_file):
    model = load_atom_grid(grid_file)
    pattern = beam_pattern(SurfaceConfig.off(8), SurfaceGeometry(8), 0.0, model=model)
    assert pattern.argmax("transmissive") == 0.0


def test_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    df = tabulate_model(DEFAULT_ATOM_MODEL, VOLTS, VOLTS, FREQS).rename(columns={"re_ct": "real_ct"})
    df.to_csv(path, index=False)
    with pytest.raises(DomainError, match="header"):
        load_atom_grid(path)


def test_rejects_incomplete_grid(tmp_path):
    path = tmp_path / "holes.csv"
    tabulate_model(DEFAULT_ATOM_MODEL, VOLTS, VOLTS, FREQS).iloc[1:].to_csv(path, index=False)
    with pytest.raises(DomainError, match="rectangular"):
        load_atom_grid(path)


def test_rejects_active_samples(tmp_path):
    path = tmp_path / "gain.csv"
    df = tabulate_model(DEFAULT_ATOM_MODEL, VOLTS, VOLTS, FREQS)
    df[["re_ct", "im_ct"]] *= 2.0
    df.to_csv(path, index=False)
    with pytest.raises(DomainError, match="passivity"):
        load_atom_grid(path)


def test_tabulated_layout():
    df = tabulate_model(DEFAULT_ATOM_MODEL, VOLTS, VOLTS, FREQS)
    assert list(df.columns) == GRID_COLUMNS
    assert len(df) == len(VOLTS) ** 2 * len(FREQS)
    assert isinstance(df, pd.DataFrame)
