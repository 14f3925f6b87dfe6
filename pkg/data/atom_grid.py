import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.interpolate import RegularGridInterpolator

from models.errors import DomainError
from models.surface_model import AtomModel, check_voltages
from utils.files import atomic_write_frame

logger = logging.getLogger(__name__)

GRID_COLUMNS = ["u_m", "u_e", "f_ghz", "re_ct", "im_ct", "re_cr", "im_cr"]

PASSIVITY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MeasuredAtomModel:
    """
    Meta-atom response interpolated from a measured (f, u_m, u_e) grid.

    Real and imaginary parts are interpolated linearly; a convex combination of passive
    samples stays passive.
    """
    name: str
    freqs: np.ndarray
    u_m: np.ndarray
    u_e: np.ndarray
    values: np.ndarray  # (n_f, n_um, n_ue, 4): re_ct, im_ct, re_cr, im_cr
    _interp: RegularGridInterpolator = field(init=False, repr=False)

    def __post_init__(self):
        if self.freqs.size == 1:
            interp = RegularGridInterpolator((self.u_m, self.u_e), self.values[0], method="linear")
        else:
            interp = RegularGridInterpolator((self.freqs, self.u_m, self.u_e), self.values,
                                             method="linear")
        object.__setattr__(self, "_interp", interp)

    @property
    def band(self) -> tuple[float, float]:
        return float(self.freqs[0]), float(self.freqs[-1])

    def coefficients(self, u_m, u_e, f):
        u_m, u_e, f = np.broadcast_arrays(np.asarray(u_m, float), np.asarray(u_e, float),
                                          np.asarray(f, float))
        if self.freqs.size == 1:
            out = self._interp(np.stack([u_m, u_e], axis=-1))
        else:
            out = self._interp(np.stack([f, u_m, u_e], axis=-1))
        c_t = out[..., 0] + 1j * out[..., 1]
        c_r = out[..., 2] + 1j * out[..., 3]
        return c_t, c_r


def load_atom_grid(path) -> MeasuredAtomModel:
    """
    Load a measured meta-atom grid: header u_m,u_e,f_ghz,re_ct,im_ct,re_cr,im_cr, one row
    per (u_m, u_e, f) on a rectangular grid.
    """
    df = pd.read_csv(path, float_precision="round_trip")
    if list(df.columns) != GRID_COLUMNS:
        raise DomainError(f"atom grid header must be {','.join(GRID_COLUMNS)}, "
                          f"got {','.join(map(str, df.columns))}")
    if df.empty:
        raise DomainError(f"no atom grid rows in {path}")

    freqs = np.sort(df["f_ghz"].unique())
    u_m = np.sort(df["u_m"].unique())
    u_e = np.sort(df["u_e"].unique())
    check_voltages(u_m)
    check_voltages(u_e)
    if len(df) != freqs.size * u_m.size * u_e.size or df.duplicated(["f_ghz", "u_m", "u_e"]).any():
        raise DomainError("atom grid is not a complete rectangular (f, u_m, u_e) grid")
    if u_m.size < 2 or u_e.size < 2:
        raise DomainError("atom grid needs at least two voltages per axis")

    power = df["re_ct"] ** 2 + df["im_ct"] ** 2 + df["re_cr"] ** 2 + df["im_cr"] ** 2
    if (power > 1.0 + PASSIVITY_TOL).any():
        worst = df.loc[power.idxmax(), ["u_m", "u_e", "f_ghz"]].tolist()
        raise DomainError(f"atom grid violates passivity at (u_m, u_e, f) = {worst}")

    ordered = df.sort_values(["f_ghz", "u_m", "u_e"])
    values = ordered[["re_ct", "im_ct", "re_cr", "im_cr"]].to_numpy().reshape(
        freqs.size, u_m.size, u_e.size, 4)
    logger.info("loaded atom grid %s: %d freqs x %d x %d voltages", path, freqs.size, u_m.size, u_e.size)
    return MeasuredAtomModel(str(path), freqs, u_m, u_e, values)


def tabulate_model(model: AtomModel, u_m_grid, u_e_grid, freqs) -> pd.DataFrame:
    """Evaluate any atom model on a rectangular grid in the measured-grid table layout."""
    f, um, ue = np.meshgrid(np.asarray(freqs, float), np.asarray(u_m_grid, float),
                            np.asarray(u_e_grid, float), indexing="ij")
    c_t, c_r = model.coefficients(um.ravel(), ue.ravel(), f.ravel())
    return pd.DataFrame({
        "u_m": um.ravel(), "u_e": ue.ravel(), "f_ghz": f.ravel(),
        "re_ct": np.real(c_t), "im_ct": np.imag(c_t),
        "re_cr": np.real(c_r), "im_cr": np.imag(c_r),
    })[GRID_COLUMNS]


def write_atom_grid(df: pd.DataFrame, path):
    return atomic_write_frame(path, df)
