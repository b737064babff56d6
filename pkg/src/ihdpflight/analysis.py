"""Frequency-domain and smoothness diagnostics for logged control signals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: output-activation gradient below which a tanh unit counts as saturated
SATURATION_GRADIENT_THRESHOLD = 0.1


@dataclass
class Spectrum:
    """Single-sided raw FFT magnitudes: freqs[k] = k * fs / n for k < n/2."""

    freqs: np.ndarray
    magnitudes: np.ndarray
    fs: float
    n: int


def fft_magnitude(series, fs: float, window: str | None = None) -> Spectrum:
    """Magnitude spectrum of a uniformly sampled series (no scaling, no detrend).

    window: None (default) or "hann".
    """
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("series must be 1-D with at least 2 samples")
    if fs <= 0.0:
        raise ValueError("fs must be positive")
    if window == "hann":
        x = x * np.hanning(x.size)
    elif window is not None:
        raise ValueError(f"unknown window {window!r}")
    n = x.size
    keep = (n + 1) // 2
    mags = np.abs(np.fft.fft(x)[:keep])
    freqs = np.arange(keep) * (fs / n)
    return Spectrum(freqs=freqs, magnitudes=mags, fs=float(fs), n=n)


def band_energy(spectrum: Spectrum, f_lo: float, f_hi: float) -> float:
    """Sum of squared magnitudes over bins with f_lo <= freq <= f_hi."""
    if f_lo < 0.0 or f_hi <= f_lo:
        raise ValueError("need 0 <= f_lo < f_hi")
    mask = (spectrum.freqs >= f_lo) & (spectrum.freqs <= f_hi)
    return float(np.sum(spectrum.magnitudes[mask] ** 2))


def action_increments(series) -> np.ndarray:
    """|x[k+1] - x[k]| for a logged command/action series."""
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("series must be 1-D with at least 2 samples")
    return np.abs(np.diff(x))


def saturation_level(z):
    """(output_fraction, gradient) of a unit tanh at pre-activation z.

    output_fraction = tanh(z) (fraction of full output scale); gradient =
    1 - tanh(z)^2.  Accepts scalars or arrays.
    """
    t = np.tanh(z)
    return t, 1.0 - t * t


def saturation_fraction(z_series, threshold: float = SATURATION_GRADIENT_THRESHOLD) -> float:
    """Fraction of samples whose tanh output gradient is below threshold."""
    _, grad = saturation_level(np.asarray(z_series, dtype=np.float64))
    if grad.size == 0:
        raise ValueError("empty series")
    return float(np.mean(grad < threshold))


def sensitivity_measure(agent, observation) -> float:
    """Local gain of an agent's policy wrt its tracking-error input (first component)."""
    return float(agent.actor.grad_input(observation)[0])


@dataclass
class SmoothnessReport:
    """Aggregate smoothness/effort statistics for one run (or one window of it)."""

    mean_abs_increment_qref: float
    max_abs_increment_qref: float
    mean_abs_increment_delta: float
    max_abs_increment_delta: float
    band_energy_qref: float
    band_energy_delta: float
    saturation_fraction_high: float
    saturation_fraction_low: float
    mean_abs_gain_high: float
    max_abs_gain_high: float
    mean_abs_gain_low: float
    max_abs_gain_low: float
    mean_cost_high: float
    mean_cost_low: float


def smoothness_report(q_ref, delta, z_out_high, z_out_low, gain_high, gain_low,
                      cost_high, cost_low, fs: float,
                      band: tuple[float, float] = (10.0, 40.0)) -> SmoothnessReport:
    """Build a SmoothnessReport from logged series (caller selects the time window)."""
    inc_q = action_increments(q_ref)
    inc_d = action_increments(delta)
    return SmoothnessReport(
        mean_abs_increment_qref=float(np.mean(inc_q)),
        max_abs_increment_qref=float(np.max(inc_q)),
        mean_abs_increment_delta=float(np.mean(inc_d)),
        max_abs_increment_delta=float(np.max(inc_d)),
        band_energy_qref=band_energy(fft_magnitude(q_ref, fs), *band),
        band_energy_delta=band_energy(fft_magnitude(delta, fs), *band),
        saturation_fraction_high=saturation_fraction(z_out_high),
        saturation_fraction_low=saturation_fraction(z_out_low),
        mean_abs_gain_high=float(np.mean(np.abs(gain_high))),
        max_abs_gain_high=float(np.max(np.abs(gain_high))),
        mean_abs_gain_low=float(np.mean(np.abs(gain_low))),
        max_abs_gain_low=float(np.max(np.abs(gain_low))),
        mean_cost_high=float(np.mean(cost_high)),
        mean_cost_low=float(np.mean(cost_low)),
    )
