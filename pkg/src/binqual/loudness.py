"""Binaural loudness back end operating on the filterbank output.

Chain per ear and channel: squared signal smoothed by a 25-ms first-order
low-pass and expressed in dB, minus inner hair-cell pre-attenuation, minus
the internal hearing threshold (zero-clipped), times a central post gain.
The dB excitation is expanded into linear specific loudness, weighted by an
active-bandwidth gain that produces spectral loudness summation, and folded
across ears with a binaural inhibition stage. Channel sums give a loudness
time series whose maximum, sent through a power law, is the sone value.

The power-law constants are self-calibrated against two anchors: a diotic
1-kHz tone at 40 dB SPL maps to 1 sone, and 60 to 70 dB SPL doubles the
loudness.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.signal import lfilter

from . import periphery
from .signals import INTERNAL_RATE_HZ, StereoSignal, resample, synth_tone

INTEGRATION_S = 0.025
TRACE_STEP_S = 0.001

#: Specific loudness grows as 10**(EXPANSION_EXPONENT * excitation_db / 10).
EXPANSION_EXPONENT = 1.0

#: Active-bandwidth weight: w = 1 + LAMBDA * log2(bandwidth in ERBs).
BANDWIDTH_LAMBDA = 0.15

#: Binaural inhibition strength; 1/3 puts diotic at 1.5x one ear internally.
INHIBITION_KAPPA = 1.0 / 3.0
INHIBITION_FLOOR = 1e-12

SONE_ANCHOR_DB = 40.0
SONE_DOUBLING_LOW_DB = 60.0
SONE_DOUBLING_HIGH_DB = 70.0


class MatchError(RuntimeError):
    """Loudness matching could not bracket or reach the target."""


@dataclass
class ExcitationTrace:
    """Per-ear, per-channel level trace on a 1-ms grid, in dB."""

    trace_db: np.ndarray
    center_freqs: np.ndarray
    fs: float
    step_s: float = TRACE_STEP_S


@dataclass
class LoudnessResult:
    """Binaural loudness in sones plus the specific-loudness traces."""

    sones: float
    internal: float
    peak_index: int
    peak_time_s: float
    center_freqs: np.ndarray
    specific_left: np.ndarray
    specific_right: np.ndarray
    specific_binaural: np.ndarray
    step_s: float = TRACE_STEP_S

    CSV_HEADER = "sones,internal,peak_time_s"

    def csv_row(self) -> str:
        return f"{self.sones:.6f},{self.internal:.6f},{self.peak_time_s:.4f}"

    def to_csv(self) -> str:
        return f"{self.CSV_HEADER}\n{self.csv_row()}\n"


def temporal_integrate(bank: periphery.ChannelBank) -> ExcitationTrace:
    """25-ms first-order smoothing of channel power, decimated to 1-ms steps."""
    alpha = np.exp(-1.0 / (INTEGRATION_S * bank.fs))
    power = lfilter([1.0 - alpha], [1.0, -alpha], bank.signals**2, axis=-1)
    step = max(int(round(TRACE_STEP_S * bank.fs)), 1)
    decimated = power[..., step - 1::step]
    trace_db = 100.0 + 10.0 * np.log10(np.maximum(decimated, 1e-30))
    return ExcitationTrace(trace_db=trace_db, center_freqs=bank.center_freqs,
                           fs=bank.fs, step_s=step / bank.fs)


def pre_attenuate(trace: ExcitationTrace,
                  audiogram: periphery.Audiogram) -> ExcitationTrace:
    """Subtract the inner hair-cell loss from each channel's level trace."""
    _, ihc = audiogram.ohc_ihc_at(trace.center_freqs)
    return ExcitationTrace(trace_db=trace.trace_db - ihc[None, :, None],
                           center_freqs=trace.center_freqs, fs=trace.fs,
                           step_s=trace.step_s)


@lru_cache(maxsize=8)
def internal_threshold_db(fs: float = INTERNAL_RATE_HZ) -> np.ndarray:
    """Trace-domain hearing threshold per channel for normal hearing.

    A tone at the free-field threshold SPL lands exactly on this trace level
    after the middle ear and the normal-hearing channel gain, so the model's
    detection threshold reproduces the embedded threshold curve.
    """
    cfs = periphery.erb_center_frequencies()
    thr_in = (periphery.absolute_threshold_db(cfs)
              + periphery.middle_ear_gain_db(cfs, fs))
    thr = thr_in + periphery.channel_gain_db(thr_in, 0.0)
    thr.flags.writeable = False
    return thr


def threshold_postgain(trace: ExcitationTrace, postgain=1.0) -> np.ndarray:
    """Excitation above the internal threshold, scaled by the central gain.

    ``postgain`` may be a scalar or one value per channel; it is the free
    parameter for fitting individual loudness growth. Hearing loss reaches
    this stage through the reduced filterbank gain and the pre-attenuation,
    so the threshold itself stays normal-hearing referenced.
    """
    thr = internal_threshold_db(trace.fs)
    excitation = np.maximum(trace.trace_db - thr[None, :, None], 0.0)
    gain = np.asarray(postgain, dtype=np.float64)
    if gain.ndim == 1:
        gain = gain[None, :, None]
    return excitation * gain


def specific_loudness(excitation_db: np.ndarray) -> np.ndarray:
    """Expand dB excitation into linear specific loudness, zero at threshold."""
    return np.where(excitation_db > 0.0,
                    10.0 ** (EXPANSION_EXPONENT * excitation_db / 10.0) - 1.0,
                    0.0)


def bandwidth_gain(excitation: np.ndarray, center_freqs: np.ndarray) -> np.ndarray:
    """Weight channels by the momentary active bandwidth.

    The bandwidth estimate is the ERB-scale span of channels with nonzero
    excitation plus one, so a single active channel gets weight one and wider
    excitation patterns are emphasized, producing spectral loudness summation.
    """
    active = excitation > 0.0
    cam = periphery.erb_number(center_freqs)
    any_active = active.any(axis=-2)
    lo = np.argmax(active, axis=-2)
    hi = active.shape[-2] - 1 - np.argmax(active[..., ::-1, :], axis=-2)
    span = cam[hi] - cam[lo] + 1.0
    width = np.where(any_active, span, 1.0)
    weight = 1.0 + BANDWIDTH_LAMBDA * np.log2(np.maximum(width, 1.0))
    return excitation * np.expand_dims(weight, -2)


def binaural_sum(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Combine per-ear specific loudness with mutual inhibition.

    Each ear is divided down by the opposite ear's relative drive; identical
    ears sum to 1.5x one ear (with kappa = 1/3) and a silent ear leaves the
    other untouched.
    """
    kappa, floor = INHIBITION_KAPPA, INHIBITION_FLOOR
    l_term = left / (1.0 + kappa * (right / (left + floor)))
    r_term = right / (1.0 + kappa * (left / (right + floor)))
    return l_term + r_term


def _internal_loudness(bank: periphery.ChannelBank, audiogram: periphery.Audiogram,
                       postgain=1.0):
    trace = temporal_integrate(bank)
    trace = pre_attenuate(trace, audiogram)
    excitation_db = threshold_postgain(trace, postgain)
    spec = specific_loudness(excitation_db)
    spec = bandwidth_gain(spec, trace.center_freqs)
    combined = binaural_sum(spec[0], spec[1])
    total = combined.sum(axis=0)
    peak = int(np.argmax(total)) if total.size else 0
    return float(total[peak]), peak, spec, combined, trace.step_s


def _internal_for_tone(level_db: float) -> float:
    sig = synth_tone(1000.0, 0.5, level_db)
    ag = periphery.Audiogram.normal_hearing()
    bank = periphery.analyze(periphery.middle_ear(sig), ag)
    internal, *_ = _internal_loudness(bank, ag)
    return internal


@lru_cache(maxsize=1)
def sone_transform_params() -> tuple[float, float]:
    """Power-law constants (scale, exponent) fixed by the two sone anchors."""
    n40 = _internal_for_tone(SONE_ANCHOR_DB)
    n60 = _internal_for_tone(SONE_DOUBLING_LOW_DB)
    n70 = _internal_for_tone(SONE_DOUBLING_HIGH_DB)
    if not 0 < n40 < n60 < n70:
        raise RuntimeError("anchor loudness values are not ordered; model misconfigured")
    beta = np.log(2.0) / np.log(n70 / n60)
    scale = n40 ** (-beta)
    return float(scale), float(beta)


def sones_from_internal(internal: float) -> float:
    scale, beta = sone_transform_params()
    if internal <= 0:
        return 0.0
    return float(scale * internal**beta)


def loudness_sones(sig: StereoSignal, audiogram: periphery.Audiogram | None = None,
                   postgain=1.0) -> LoudnessResult:
    """Binaural loudness of a calibrated stimulus, in sones.

    Runs the ungated front end (the loudness path applies its own threshold)
    and the full back end. Silence and fully sub-threshold input give exactly
    0 sones.
    """
    ag = audiogram if audiogram is not None else periphery.Audiogram.normal_hearing()
    s = resample(sig, INTERNAL_RATE_HZ)
    s = periphery.middle_ear(s)
    bank = periphery.analyze(s, ag)
    internal, peak, spec, combined, step_s = _internal_loudness(bank, ag, postgain)
    return LoudnessResult(sones=sones_from_internal(internal), internal=internal,
                          peak_index=peak, peak_time_s=peak * step_s,
                          center_freqs=bank.center_freqs,
                          specific_left=spec[0], specific_right=spec[1],
                          specific_binaural=combined, step_s=step_s)


def match_level(probe: Callable[[float], StereoSignal], reference: StereoSignal,
                audiogram: periphery.Audiogram | None = None,
                lo_db: float = 0.0, hi_db: float = 110.0,
                rel_tol: float = 0.01, max_iter: int = 40) -> float:
    """Probe level at which the probe is as loud as the reference.

    Bisection on the probe level, assuming loudness grows monotonically with
    level. A reference below threshold (0 sones) turns the search into a
    detection-threshold search for the probe. Raises :class:`MatchError`
    when the bracket does not contain the target.
    """
    ag = audiogram if audiogram is not None else periphery.Audiogram.normal_hearing()
    target = loudness_sones(reference, ag).sones

    def sones_at(level: float) -> float:
        return loudness_sones(probe(level), ag).sones

    if target <= 0.0:
        if sones_at(hi_db) <= 0.0:
            raise MatchError("reference is inaudible and the probe never becomes audible")
        lo, hi = lo_db, hi_db
        if sones_at(lo) > 0.0:
            return lo
        for _ in range(max_iter):
            if hi - lo <= 0.05:
                break
            mid = 0.5 * (lo + hi)
            if sones_at(mid) > 0.0:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    s_lo, s_hi = sones_at(lo_db), sones_at(hi_db)
    if s_lo > target * (1.0 + rel_tol):
        raise MatchError(f"probe at {lo_db} dB is already louder than the reference")
    if s_hi < target * (1.0 - rel_tol):
        raise MatchError(f"probe at {hi_db} dB is still quieter than the reference")

    lo, hi = lo_db, hi_db
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        s_mid = sones_at(mid)
        if abs(s_mid - target) <= rel_tol * target and hi - lo <= 0.25:
            return mid
        if s_mid < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
