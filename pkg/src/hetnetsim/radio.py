"""Link-budget arithmetic: path loss, shadowing, received power, SINR, throughput.

All powers are in dBm, losses in dB, distances in metres. Functions accept
scalars or numpy arrays and are pure except for `shadowing_db`, which draws
from a caller-owned RNG.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MACRO = "macro_enb"
MICRO = "lteu_microcell"

MACRO_TX_DBM = 43.0
MICRO_TX_DBM = 10.0

# Macro path-loss coefficients: PL = 15.3 + 37.6*log10(R[m]).
MACRO_PL_INTERCEPT_DB = 15.3
MACRO_PL_SLOPE = 37.6

# Microcell model (simulator choice, no published figure): PL = 37.0 + 30.0*log10(R[m]).
MICRO_PL_INTERCEPT_DB = 37.0
MICRO_PL_SLOPE = 30.0

SHADOWING_SIGMA_DB = 8.0

THERMAL_NOISE_DBM_PER_HZ = -174.0


@dataclass(frozen=True)
class TxConfig:
    """Transmitter configuration for a cell site."""

    tx_power_dbm: float
    kind: str  # MACRO or MICRO
    carrier: str = "licensed"  # licensed (macro) or unlicensed (LTE-U micro)


def macro_tx() -> TxConfig:
    return TxConfig(MACRO_TX_DBM, MACRO, "licensed")


def micro_tx() -> TxConfig:
    return TxConfig(MICRO_TX_DBM, MICRO, "unlicensed")


@dataclass(frozen=True)
class LinkBudget:
    """One directed link snapshot; rx_dbm = tx - path_loss - shadowing."""

    distance_m: float
    path_loss_db: float
    shadow_db: float
    rx_dbm: float


def _clamped_distance(distance_m):
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError(f"distance must be positive, got {distance_m}")
    return np.maximum(d, 1.0)


def macro_path_loss_db(distance_m, intercept_db=MACRO_PL_INTERCEPT_DB, slope=MACRO_PL_SLOPE):
    """Macro-link path loss in dB; distances below 1 m are clamped to 1 m."""
    d = _clamped_distance(distance_m)
    out = intercept_db + slope * np.log10(d)
    return float(out) if np.ndim(distance_m) == 0 else out


def micro_path_loss_db(distance_m, intercept_db=MICRO_PL_INTERCEPT_DB, slope=MICRO_PL_SLOPE):
    """Microcell-link path loss in dB; same clamping rule as the macro model."""
    d = _clamped_distance(distance_m)
    out = intercept_db + slope * np.log10(d)
    return float(out) if np.ndim(distance_m) == 0 else out


def shadowing_db(rng: np.random.Generator, sigma_db: float = SHADOWING_SIGMA_DB, size=None):
    """Log-normal shadowing sample(s): zero-mean Gaussian in dB."""
    return rng.normal(0.0, sigma_db, size=size)


def lin(dbm):
    """dBm (or dB) to linear units."""
    return 10.0 ** (np.asarray(dbm, dtype=float) / 10.0)


def link_budget(tx: TxConfig, distance_m: float, shadow_db: float) -> LinkBudget:
    if tx.kind == MACRO:
        pl = macro_path_loss_db(distance_m)
    else:
        pl = micro_path_loss_db(distance_m)
    return LinkBudget(distance_m, pl, shadow_db, tx.tx_power_dbm - pl - shadow_db)


def noise_floor_dbm(bandwidth_mhz: float = 20.0) -> float:
    """Thermal noise floor over the given bandwidth (~-101 dBm at 20 MHz)."""
    if bandwidth_mhz <= 0:
        raise ValueError("bandwidth must be positive")
    return THERMAL_NOISE_DBM_PER_HZ + 10.0 * np.log10(bandwidth_mhz * 1e6)


def sinr_db(signal_dbm: float, interferers_dbm, noise_dbm: float) -> float:
    """SINR in dB from a signal power, a list of interferer powers, and a noise floor."""
    if not np.isfinite(noise_dbm):
        raise ValueError("noise floor must be finite")
    interference = float(np.sum(lin(interferers_dbm))) if len(interferers_dbm) else 0.0
    return float(10.0 * np.log10(lin(signal_dbm) / (interference + lin(noise_dbm))))


def shannon_throughput_mbps(sinr_db_value, bandwidth_mhz: float = 20.0):
    """Abstract link capacity: BW[MHz] * log2(1 + SINR_linear)."""
    if bandwidth_mhz <= 0:
        raise ValueError("bandwidth must be positive")
    out = bandwidth_mhz * np.log2(1.0 + lin(sinr_db_value))
    return float(out) if np.ndim(sinr_db_value) == 0 else out
