import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

# floor used when a linear amplitude of exactly zero is converted to dB
DB_FLOOR = -300.0


def amplitude_to_db(amplitude):
    """
    Convert a linear amplitude ratio (scalar or array) to dB, 20·log10(|x|).

    Zero amplitudes map to DB_FLOOR instead of -inf so patterns stay finite.
    """
    mag = np.abs(np.asarray(amplitude, dtype=complex))
    with np.errstate(divide='ignore'):
        out = 20.0 * np.log10(mag)
    out = np.maximum(out, DB_FLOOR)
    return float(out) if out.ndim == 0 else out


def power_to_db(power):
    p = np.asarray(power, dtype=float)
    with np.errstate(divide='ignore'):
        out = 10.0 * np.log10(p)
    out = np.maximum(out, DB_FLOOR)
    return float(out) if out.ndim == 0 else out


def db_to_linear(db):
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0)


def wavelength_m(f_ghz: float) -> float:
    return SPEED_OF_LIGHT / (f_ghz * 1e9)


def wrap_deg(angle):
    """Wrap an angle (or array of angles) into [-180, 180)."""
    return (np.asarray(angle, dtype=float) + 180.0) % 360.0 - 180.0


def sin_deg(angle):
    return np.sin(np.deg2rad(angle))
