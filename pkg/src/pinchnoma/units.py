"""Power unit conversions."""

import math

import numpy as np


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(watt):
    return 10.0 * np.log10(np.asarray(watt, dtype=float)) + 30.0


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def noise_sigma(noise_dbm, total=False):
    """Per-real-dimension noise std from a noise power quoted in dBm.

    By default the quoted figure is the per-dimension variance ``sigma**2``.
    With ``total=True`` it is the complex noise power ``2 sigma**2``.
    """
    var = float(dbm_to_watt(noise_dbm))
    if total:
        var /= 2.0
    return math.sqrt(var)
