"""Bit-error-rate computation.

Three accuracy tiers, mirroring how channel quality can be turned into a
packet-level error process:

* threshold -- BER is 1 below an SNR cutoff and 0 at or above it;
* analytic -- closed-form AWGN formulas per modulation mode;
* pilot-based Monte Carlo -- an OFDM-style pilot grid over a synthetic
  multipath channel, estimated with LS (per-pilot division plus linear
  interpolation) or MMSE (Wiener smoothing of the LS estimates using the
  known tap correlation and noise variance), then equalized and bit errors
  counted.

The analytic formulas: BPSK/QPSK use Q(sqrt(2 Eb/N0)); square/rectangular
M-QAM uses (4/log2 M)(1 - 1/sqrt(M)) Q(sqrt(3 log2 M / (M-1) * Eb/N0)),
with the sqrt(M) convention applied to M = 8 as well (rectangular
constellation approximation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np

from uansim.core import ConfigError, derive_seed_sequence

MODE_BITS = {"bpsk": 1, "qpsk": 2, "qam8": 3, "qam16": 4, "qam64": 6}


def q_function(x: float) -> float:
    """Gaussian tail probability Q(x) = 0.5 erfc(x / sqrt(2))."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


@dataclass
class BerEstimate:
    ber: float
    method: str
    stderr: float = 0.0
    warning: str = ""

    def __post_init__(self):
        if not 0.0 <= self.ber <= 1.0:
            raise ValueError(f"ber {self.ber} outside [0, 1]")


def ber_threshold(snr_db: float, threshold_db: float) -> BerEstimate:
    """All-or-nothing channel: BER 1 below the threshold, 0 at or above it."""
    return BerEstimate(0.0 if snr_db >= threshold_db else 1.0, "threshold")


def ber_analytic(mode: str, ebn0_db: float) -> BerEstimate:
    mode = mode.lower()
    bits = MODE_BITS.get(mode)
    if bits is None:
        raise ConfigError(f"unknown modulation mode {mode!r}")
    ebn0 = 10.0 ** (ebn0_db / 10.0)
    if bits <= 2:
        ber = q_function(math.sqrt(2.0 * ebn0))
    else:
        m = 2 ** bits
        coeff = (4.0 / bits) * (1.0 - 1.0 / math.sqrt(m))
        ber = coeff * q_function(math.sqrt(3.0 * bits / (m - 1.0) * ebn0))
    return BerEstimate(min(max(ber, 0.0), 1.0), "analytic")


def ebn0_from_snr(snr_db: float, mode: str, bandwidth_hz: float | None = None,
                  symbol_rate: float | None = None) -> float:
    """Eb/N0 = SNR - 10 log10(bits/symbol) + 10 log10(bandwidth / symbol rate).

    With the matched-rate default (bandwidth == symbol rate) the last term
    vanishes.
    """
    bits = MODE_BITS[mode.lower()]
    ebn0 = snr_db - 10.0 * math.log10(bits)
    if bandwidth_hz is not None and symbol_rate is not None:
        ebn0 += 10.0 * math.log10(bandwidth_hz / symbol_rate)
    return ebn0


@lru_cache(maxsize=64)
def snr_threshold_for_ber(mode: str, target_ber: float = 1e-3) -> float:
    """Invert the analytic AWGN curve: smallest SNR whose BER <= target."""
    lo, hi = -10.0, 60.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if ber_analytic(mode, ebn0_from_snr(mid, mode)).ber <= target_ber:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass
class PilotChannelSpec:
    """Synthetic multipath channel observed through an OFDM pilot grid."""

    num_subcarriers: int = 64
    pilot_spacing: int = 4
    tap_powers: tuple[float, ...] = (0.6338, 0.2331, 0.0858)  # exp(-m) normalized
    fading: bool = True  # Rayleigh taps; False pins taps at sqrt(power)
    seed: int = 0

    def __post_init__(self):
        if self.num_subcarriers % self.pilot_spacing != 0:
            raise ConfigError("pilot_spacing must divide num_subcarriers")
        total = sum(self.tap_powers)
        self.tap_powers = tuple(p / total for p in self.tap_powers)


def _qpsk_symbols(bits: np.ndarray) -> np.ndarray:
    # Gray-mapped QPSK, unit symbol energy: bit0 -> real sign, bit1 -> imag sign
    return ((1 - 2.0 * bits[..., 0]) + 1j * (1 - 2.0 * bits[..., 1])) / math.sqrt(2.0)


def ber_pilot_estimate(spec: PilotChannelSpec,
                       method: Literal["ls", "mmse", "perfect"],
                       snr_db: float, trials: int,
                       chunk: int = 20000) -> BerEstimate:
    """Monte Carlo BER of pilot-based channel estimation plus equalization.

    ``perfect`` bypasses estimation (true channel at the equalizer) and is
    the baseline the analytic AWGN curve must match on a non-fading
    single-tap channel.
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    n = spec.num_subcarriers
    pilot_idx = np.arange(0, n, spec.pilot_spacing)
    data_idx = np.setdiff1d(np.arange(n), pilot_idx)
    taps = np.asarray(spec.tap_powers)
    n_taps = len(taps)
    # subcarrier response of each tap: F[k, m] = exp(-2j pi k m / N)
    fgrid = np.exp(-2j * np.pi * np.outer(np.arange(n), np.arange(n_taps)) / n)
    noise_var = 10.0 ** (-snr_db / 10.0)

    rng = np.random.Generator(np.random.PCG64(
        derive_seed_sequence(spec.seed, ("ber_pilot", method, round(snr_db, 6)))))
    pilot_sym = _qpsk_symbols(rng.integers(0, 2, size=(len(pilot_idx), 2)))

    if method == "ls":
        w_interp = _interp_matrix(pilot_idx, n)

    if method == "mmse":
        # Wiener smoother from the tap power-delay profile:
        #   W = R[all, pilots] (R[pilots, pilots] + noise_var I)^-1
        r_full = (fgrid * taps) @ fgrid.conj().T  # R[k, l] = sum_m p_m e^{-2j pi m (k-l)/N}
        r_pp = r_full[np.ix_(pilot_idx, pilot_idx)]
        r_ap = r_full[:, pilot_idx]
        w_mmse = r_ap @ np.linalg.inv(r_pp + noise_var * np.eye(len(pilot_idx)))

    bit_errors = 0
    per_trial_ber: list[np.ndarray] = []
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        done += m
        if spec.fading:
            gains = (rng.standard_normal((m, n_taps)) + 1j * rng.standard_normal((m, n_taps)))
            gains *= np.sqrt(taps / 2.0)
        else:
            gains = np.broadcast_to(np.sqrt(taps), (m, n_taps)).astype(complex)
        h = gains @ fgrid.T  # (m, n)

        data_bits = rng.integers(0, 2, size=(m, len(data_idx), 2))
        x = np.empty((m, n), dtype=complex)
        x[:, pilot_idx] = pilot_sym
        x[:, data_idx] = _qpsk_symbols(data_bits)
        noise = (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n)))
        noise *= math.sqrt(noise_var / 2.0)
        y = h * x + noise

        if method == "perfect":
            h_est = h
        else:
            h_pilot = y[:, pilot_idx] / pilot_sym
            if method == "ls":
                h_est = h_pilot @ w_interp.T
            elif method == "mmse":
                h_est = h_pilot @ w_mmse.T
            else:
                raise ConfigError(f"unknown estimation method {method!r}")

        x_hat = y[:, data_idx] / h_est[:, data_idx]
        errs = (np.signbit(x_hat.real) != data_bits[..., 0].astype(bool)).sum(axis=1)
        errs = errs + (np.signbit(x_hat.imag) != data_bits[..., 1].astype(bool)).sum(axis=1)
        bit_errors += int(errs.sum())
        per_trial_ber.append(errs / (2.0 * len(data_idx)))

    total_bits = trials * 2 * len(data_idx)
    ber = bit_errors / total_bits
    trial_bers = np.concatenate(per_trial_ber)
    stderr = float(np.std(trial_bers, ddof=1) / math.sqrt(trials)) if trials > 1 else 1.0
    warning = ""
    if bit_errors < 10:
        warning = f"only {bit_errors} bit errors observed; increase trials"
    return BerEstimate(ber, method, stderr=stderr, warning=warning)


def _interp_matrix(pilot_idx: np.ndarray, n: int) -> np.ndarray:
    """Linear-interpolation weights over subcarrier index, holding the edges."""
    w = np.zeros((n, len(pilot_idx)))
    for k in range(n):
        if k <= pilot_idx[0]:
            w[k, 0] = 1.0
        elif k >= pilot_idx[-1]:
            w[k, -1] = 1.0
        else:
            hi = int(np.searchsorted(pilot_idx, k, side="right"))
            lo = hi - 1
            frac = (k - pilot_idx[lo]) / (pilot_idx[hi] - pilot_idx[lo])
            w[k, lo] = 1.0 - frac
            w[k, hi] = frac
    return w
