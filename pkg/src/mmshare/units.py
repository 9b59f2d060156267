"""dB / linear conversions. Internal power unit is mW."""

import numpy as np


def db_to_linear(db):
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm_to_mw(dbm):
    return db_to_linear(dbm)


def mw_to_dbm(mw):
    return linear_to_db(mw)


def noise_power_mw(noise_psd_dbm_hz: float, bandwidth_hz: float, noise_figure_db: float) -> float:
    """Thermal noise N_f * N_0 * W in mW."""
    return float(dbm_to_mw(noise_psd_dbm_hz + 10.0 * np.log10(bandwidth_hz) + noise_figure_db))
