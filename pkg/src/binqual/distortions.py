"""Synthetic distortions for exercising the quality model.

Four kinds, all deterministic for a given seed:

``tilt``
    Spectral tilt in dB/octave around 1 kHz, applied identically to both
    ears (a purely monaural coloration).
``additive_noise``
    Independent white Gaussian noise per ear at the given SNR in dB relative
    to each ear's RMS.
``ild_shift``
    Broadband gain in dB applied to the right ear only.
``decorrelate``
    Per-ear independent noise mixed in at ``mix`` (0 = untouched, 1 = fully
    independent ears), RMS preserved per ear.
"""
from __future__ import annotations

import numpy as np

from .signals import SignalError, StereoSignal

DISTORTION_KINDS = ("tilt", "additive_noise", "ild_shift", "decorrelate")


def _tilt(sig: StereoSignal, db_per_octave: float) -> StereoSignal:
    n = sig.n_samples
    freqs = np.fft.rfftfreq(n, 1.0 / sig.fs)
    gain = np.zeros_like(freqs)
    nonzero = freqs > 0
    gain[nonzero] = 10.0 ** (db_per_octave * np.log2(freqs[nonzero] / 1000.0) / 20.0)
    ears = [np.fft.irfft(np.fft.rfft(x) * gain, n) for x in sig.ears()]
    return StereoSignal(ears[0], ears[1], sig.fs, sig.calibration_db_spl)


def _additive_noise(sig: StereoSignal, snr_db: float, rng) -> StereoSignal:
    ears = []
    for x in sig.ears():
        noise = rng.standard_normal(x.size)
        rms = np.sqrt(np.mean(x**2))
        noise_rms = np.sqrt(np.mean(noise**2))
        target = rms * 10.0 ** (-snr_db / 20.0)
        ears.append(x + noise * (target / noise_rms if noise_rms > 0 else 0.0))
    return StereoSignal(ears[0], ears[1], sig.fs, sig.calibration_db_spl)


def _ild_shift(sig: StereoSignal, gain_db: float) -> StereoSignal:
    right = sig.samples_right * 10.0 ** (gain_db / 20.0)
    return StereoSignal(sig.samples_left.copy(), right, sig.fs, sig.calibration_db_spl)


def _decorrelate(sig: StereoSignal, mix: float, rng) -> StereoSignal:
    if not 0.0 <= mix <= 1.0:
        raise SignalError("decorrelate mix must lie in [0, 1]")
    ears = []
    for x in sig.ears():
        noise = rng.standard_normal(x.size)
        rms = np.sqrt(np.mean(x**2))
        noise_rms = np.sqrt(np.mean(noise**2))
        scaled = noise * (rms / noise_rms if noise_rms > 0 else 0.0)
        ears.append(np.sqrt(1.0 - mix**2) * x + mix * scaled)
    return StereoSignal(ears[0], ears[1], sig.fs, sig.calibration_db_spl)


def distort(sig: StereoSignal, kind: str, param: float, seed: int = 0) -> StereoSignal:
    """Apply one named distortion; see the module docstring for the kinds."""
    if not np.isfinite(param):
        raise SignalError("distortion parameter must be finite")
    rng = np.random.default_rng(seed)
    if kind == "tilt":
        return _tilt(sig, param)
    if kind == "additive_noise":
        return _additive_noise(sig, param, rng)
    if kind == "ild_shift":
        return _ild_shift(sig, param)
    if kind == "decorrelate":
        return _decorrelate(sig, param, rng)
    raise SignalError(f"unknown distortion kind {kind!r} (choose from {DISTORTION_KINDS})")
