"""Nonlinear peripheral front end shared by the quality and loudness paths.

Stages: middle-ear band emphasis, a 23-channel level-dependent gammatone
filterbank with audiogram-driven gain reduction and bandwidth broadening,
hearing-threshold gating, and envelope / temporal-fine-structure extraction.

The filterbank realizes cochlear compression as a time-varying in-band gain:
full gain below 30 dB SPL, a compressive growth slope of 0.25 between 30 and
100 dB SPL, and linear growth above. Outer hair-cell loss scales the gain
down, which both raises effective thresholds and linearizes the input/output
function; inner hair-cell loss is handled downstream in the loudness path.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import butter, freqz, hilbert, lfilter

from .signals import (INTERNAL_RATE_HZ, SignalError, StereoSignal, resample,
                      rms_to_spl)

CHANNEL_COUNT = 23
CF_MIN_HZ = 80.0
CF_MAX_HZ = 12500.0

#: Channels below this carrier keep their fine structure for binaural features.
TFS_MAX_HZ = 1300.0
#: Quality features only use channels at or above this center frequency.
QUALITY_MIN_HZ = 315.0

COMPRESSION_SLOPE = 0.25
KNEE_LOW_DB = 30.0
KNEE_HIGH_DB = 100.0
#: Low-level cochlear gain for normal hearing; decays to 0 dB at the upper knee.
MAX_GAIN_DB = (1.0 - COMPRESSION_SLOPE) * (KNEE_HIGH_DB - KNEE_LOW_DB)

#: Outer hair cells absorb at most this much of the total loss.
OHC_CAP_DB = 50.0
OHC_FRACTION = 0.8

CONTROL_SMOOTHING_S = 0.010
CONTROL_BLOCK_S = 0.001
ENV_LOWPASS_HZ = 150.0

# Free-field hearing threshold (dB SPL) on the ISO 226 frequency grid.
_THRESHOLD_FREQ_HZ = np.array([
    20.0, 25.0, 31.5, 40.0, 50.0, 63.0, 80.0, 100.0, 125.0, 160.0, 200.0,
    250.0, 315.0, 400.0, 500.0, 630.0, 800.0, 1000.0, 1250.0, 1600.0,
    2000.0, 2500.0, 3150.0, 4000.0, 5000.0, 6300.0, 8000.0, 10000.0, 12500.0])
_THRESHOLD_DB_SPL = np.array([
    78.5, 68.7, 59.5, 51.1, 44.0, 37.5, 31.5, 26.5, 22.1, 17.9, 14.4,
    11.4, 8.6, 6.2, 4.4, 3.0, 2.2, 2.4, 3.5, 1.7, -1.3, -4.2, -6.0,
    -5.4, -1.5, 6.0, 12.6, 13.9, 12.3])


def erb_number(freq_hz):
    """Auditory-scale coordinate (ERB number) of a frequency in Hz."""
    return 21.4 * np.log10(4.37 * np.asarray(freq_hz, dtype=np.float64) / 1000.0 + 1.0)


def erb_number_to_hz(erb):
    """Inverse of :func:`erb_number`."""
    return (10.0 ** (np.asarray(erb, dtype=np.float64) / 21.4) - 1.0) * 1000.0 / 4.37


def erb_bandwidth_hz(freq_hz):
    """Equivalent rectangular bandwidth of the auditory filter at `freq_hz`."""
    return 24.7 * (4.37 * np.asarray(freq_hz, dtype=np.float64) / 1000.0 + 1.0)


def erb_center_frequencies() -> np.ndarray:
    """23 center frequencies equally spaced on the ERB scale, 80 to 12500 Hz."""
    cams = np.linspace(erb_number(CF_MIN_HZ), erb_number(CF_MAX_HZ), CHANNEL_COUNT)
    cfs = erb_number_to_hz(cams)
    cfs[0], cfs[-1] = CF_MIN_HZ, CF_MAX_HZ
    return cfs


def absolute_threshold_db(freq_hz):
    """Free-field hearing threshold in dB SPL, interpolated on log frequency."""
    f = np.asarray(freq_hz, dtype=np.float64)
    return np.interp(np.log10(f), np.log10(_THRESHOLD_FREQ_HZ), _THRESHOLD_DB_SPL)


class AudiogramError(ValueError):
    """Invalid audiogram data."""


@dataclass
class Audiogram:
    """Per-frequency hearing loss with a derived outer/inner hair-cell split.

    The split assigns 80% of the total loss to the outer hair cells, capped
    at 50 dB; the remainder counts as inner hair-cell loss. Values at
    arbitrary frequencies are interpolated linearly on log frequency with
    edge clamping.
    """

    freqs_hz: np.ndarray
    hl_db: np.ndarray

    def __post_init__(self):
        self.freqs_hz = np.atleast_1d(np.asarray(self.freqs_hz, dtype=np.float64))
        self.hl_db = np.atleast_1d(np.asarray(self.hl_db, dtype=np.float64))
        if self.freqs_hz.size != self.hl_db.size or self.freqs_hz.size == 0:
            raise AudiogramError("freqs_hz and hl_db must be equally sized and non-empty")
        if np.any(self.freqs_hz <= 0):
            raise AudiogramError("audiogram frequencies must be positive")
        if np.any(np.diff(self.freqs_hz) <= 0):
            raise AudiogramError("audiogram frequencies must be strictly increasing")
        if np.any(self.hl_db < 0):
            raise AudiogramError("hearing loss must be non-negative")
        if not np.isfinite(self.hl_db).all():
            raise AudiogramError("hearing loss must be finite")

    @classmethod
    def normal_hearing(cls) -> "Audiogram":
        return cls(np.array([125.0, 8000.0]), np.zeros(2))

    @classmethod
    def from_file(cls, path) -> "Audiogram":
        """Load ``{"freqs_hz": [...], "hl_db": [...]}`` from a JSON file."""
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
        try:
            return cls(np.asarray(payload["freqs_hz"]), np.asarray(payload["hl_db"]))
        except KeyError as exc:
            raise AudiogramError(f"audiogram file {path} lacks field {exc}") from exc

    @property
    def hl_ohc_db(self) -> np.ndarray:
        return np.minimum(OHC_FRACTION * self.hl_db, OHC_CAP_DB)

    @property
    def hl_ihc_db(self) -> np.ndarray:
        return self.hl_db - self.hl_ohc_db

    def total_at(self, freqs_hz) -> np.ndarray:
        f = np.atleast_1d(np.asarray(freqs_hz, dtype=np.float64))
        return np.interp(np.log10(f), np.log10(self.freqs_hz), self.hl_db)

    def ohc_ihc_at(self, freqs_hz) -> tuple[np.ndarray, np.ndarray]:
        total = self.total_at(freqs_hz)
        ohc = np.minimum(OHC_FRACTION * total, OHC_CAP_DB)
        return ohc, total - ohc


def split_audiogram(freqs_hz, hl_db) -> Audiogram:
    """Validate audiometric data and return it with the OHC/IHC split."""
    return Audiogram(np.asarray(freqs_hz), np.asarray(hl_db))


@lru_cache(maxsize=8)
def _middle_ear_design(fs: float):
    b_hp, a_hp = butter(2, 350.0 / (fs / 2.0), btype="highpass")
    b_lp, a_lp = butter(2, 6000.0 / (fs / 2.0), btype="lowpass")
    _, h_hp = freqz(b_hp, a_hp, worN=[1000.0], fs=fs)
    _, h_lp = freqz(b_lp, a_lp, worN=[1000.0], fs=fs)
    scale = 1.0 / abs(h_hp[0] * h_lp[0])
    return b_hp, a_hp, b_lp, a_lp, scale


def middle_ear(sig: StereoSignal) -> StereoSignal:
    """Band-emphasis filtering of the outer/middle ear, unity gain at 1 kHz."""
    b_hp, a_hp, b_lp, a_lp, scale = _middle_ear_design(sig.fs)
    ears = []
    for x in sig.ears():
        y = lfilter(b_lp, a_lp, lfilter(b_hp, a_hp, x))
        ears.append(y * scale)
    return StereoSignal(ears[0], ears[1], sig.fs, sig.calibration_db_spl)


def middle_ear_gain_db(freqs_hz, fs: float = INTERNAL_RATE_HZ) -> np.ndarray:
    """Magnitude response of the middle-ear stage at the given frequencies."""
    b_hp, a_hp, b_lp, a_lp, scale = _middle_ear_design(fs)
    f = np.atleast_1d(np.asarray(freqs_hz, dtype=np.float64))
    _, h_hp = freqz(b_hp, a_hp, worN=f, fs=fs)
    _, h_lp = freqz(b_lp, a_lp, worN=f, fs=fs)
    return 20.0 * np.log10(np.abs(h_hp * h_lp) * scale)


def channel_gain_db(level_db, ohc_loss_db):
    """In-band gain rule of one filterbank channel.

    Normal hearing gets :data:`MAX_GAIN_DB` below the lower knee, a gain that
    shrinks with slope ``1 - COMPRESSION_SLOPE`` between the knees, and 0 dB
    above. Outer hair-cell loss scales the whole curve toward 0, which turns
    compressive growth back into linear growth.
    """
    level = np.asarray(level_db, dtype=np.float64)
    mid = MAX_GAIN_DB - (1.0 - COMPRESSION_SLOPE) * (level - KNEE_LOW_DB)
    gain = np.clip(mid, 0.0, MAX_GAIN_DB)
    scale = np.clip(1.0 - np.asarray(ohc_loss_db, dtype=np.float64) / OHC_CAP_DB, 0.0, 1.0)
    return gain * scale


# 4th-order gammatone: per-stage decay that makes the cascade's equivalent
# rectangular bandwidth match the requested bandwidth (0.98175 = a_4).
_BANDWIDTH_TO_DECAY = 1.0 / 0.9817622           # = classic 1.019 factor


def _gammatone_coeffs(cf_hz: float, bw_hz: float, fs: float):
    lam = np.exp(-2.0 * np.pi * (_BANDWIDTH_TO_DECAY * bw_hz) / fs)
    pole = lam * np.exp(1j * 2.0 * np.pi * cf_hz / fs)
    a = np.array([1.0, -4.0 * pole, 6.0 * pole**2, -4.0 * pole**3, pole**4])
    b = np.array([(1.0 - lam) ** 4], dtype=complex)
    return b, a


def _gammatone_mag_sq(freqs_hz: np.ndarray, cf_hz: float, bw_hz: float, fs: float):
    lam = np.exp(-2.0 * np.pi * (_BANDWIDTH_TO_DECAY * bw_hz) / fs)
    pole = lam * np.exp(1j * 2.0 * np.pi * cf_hz / fs)
    z = np.exp(-2j * np.pi * freqs_hz / fs)
    d = np.abs(1.0 - pole * z) ** 2
    return ((1.0 - lam) ** 2 / d) ** 4


@dataclass
class ChannelBank:
    """Per-ear, per-channel band signals with their smoothed control levels.

    ``signals`` and ``control_level_db`` are shaped (2, channels, samples).
    ``mask`` is None before threshold gating and boolean afterwards.
    """

    center_freqs: np.ndarray
    fs: float
    signals: np.ndarray
    control_level_db: np.ndarray
    mask: np.ndarray | None = None


@dataclass
class PeripheralRepresentation:
    """Envelope and fine-structure signals after the front end.

    ``env`` is the 150-Hz low-passed Hilbert envelope per ear and channel.
    ``tfs`` holds the complex analytic band signal for channels whose center
    frequency sits below the 1.3-kHz fine-structure crossover.
    """

    center_freqs: np.ndarray
    fs: float
    env: np.ndarray
    tfs: np.ndarray
    tfs_channel_indices: np.ndarray


def quality_channel_indices(center_freqs: np.ndarray) -> np.ndarray:
    """Channels used by the quality features (cf >= 315 Hz)."""
    return np.where(center_freqs >= QUALITY_MIN_HZ)[0]


def _block_reduce(x: np.ndarray, block: int) -> np.ndarray:
    n_blocks = -(-x.size // block)
    padded = np.pad(x, (0, n_blocks * block - x.size), mode="edge")
    return padded.reshape(n_blocks, block).mean(axis=1)


def _analyze_ear(x: np.ndarray, fs: float, cfs: np.ndarray,
                 ohc_db: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = x.size
    spec = np.fft.rfft(x)
    spec_pow = np.abs(spec) ** 2
    grid = np.fft.rfftfreq(n, 1.0 / fs)

    block = max(int(round(CONTROL_BLOCK_S * fs)), 1)
    alpha = np.exp(-1.0 / (CONTROL_SMOOTHING_S * fs))
    out = np.empty((cfs.size, n))
    ctrl = np.empty((cfs.size, n))
    for p, cf in enumerate(cfs):
        base_bw = float(erb_bandwidth_hz(cf))
        # input-referred channel level sets the tuning bandwidth
        mag_sq = _gammatone_mag_sq(grid[1:], cf, base_bw, fs)
        mean_sq = 2.0 / n**2 * np.dot(mag_sq, spec_pow[1:])
        level_bar = float(rms_to_spl(np.sqrt(max(mean_sq, 1e-20))))
        bw = base_bw * (1.0 + 2.0 * ohc_db[p] / OHC_CAP_DB
                        + np.clip((level_bar - KNEE_LOW_DB) / (KNEE_HIGH_DB - KNEE_LOW_DB), 0.0, 1.0))
        b, a = _gammatone_coeffs(cf, bw, fs)
        y = lfilter(b, a, x)
        # |y| is half the real-signal envelope (one-sided filter), so the
        # in-channel RMS level is |y| * sqrt(2)
        env = lfilter([1.0 - alpha], [1.0, -alpha], np.abs(y))
        block_env = _block_reduce(env, block)
        levels = rms_to_spl(np.maximum(block_env, 1e-12) * np.sqrt(2.0))
        gains = 10.0 ** (channel_gain_db(levels, ohc_db[p]) / 20.0)
        out[p] = 2.0 * np.real(y) * np.repeat(gains, block)[:n]
        ctrl[p] = np.repeat(levels, block)[:n]
    return out, ctrl


def analyze(sig: StereoSignal, audiogram: Audiogram | None = None) -> ChannelBank:
    """Run the level-dependent filterbank on a middle-ear filtered signal.

    The input is expected at the internal rate (or at least high enough to
    carry the 12.5-kHz top channel). Diotic inputs are processed once and
    mirrored.
    """
    if sig.fs < 2.0 * CF_MAX_HZ * 1.05:
        raise SignalError(
            f"sample rate {sig.fs} Hz is too low for the {CF_MAX_HZ:.0f}-Hz top channel")
    ag = audiogram if audiogram is not None else Audiogram.normal_hearing()
    cfs = erb_center_frequencies()
    ohc, _ = ag.ohc_ihc_at(cfs)
    left_out, left_ctrl = _analyze_ear(sig.samples_left, sig.fs, cfs, ohc)
    if sig.is_diotic:
        right_out, right_ctrl = left_out.copy(), left_ctrl.copy()
    else:
        right_out, right_ctrl = _analyze_ear(sig.samples_right, sig.fs, cfs, ohc)
    return ChannelBank(center_freqs=cfs, fs=sig.fs,
                       signals=np.stack([left_out, right_out]),
                       control_level_db=np.stack([left_ctrl, right_ctrl]))


def gate_threshold_db(audiogram: Audiogram, center_freqs: np.ndarray,
                      fs: float = INTERNAL_RATE_HZ) -> np.ndarray:
    """In-channel control-level threshold: free-field threshold plus loss.

    Expressed in the same input-referred domain as the control level, so the
    middle-ear response is folded in.
    """
    return (absolute_threshold_db(center_freqs)
            + middle_ear_gain_db(center_freqs, fs)
            + audiogram.total_at(center_freqs))


def apply_threshold(bank: ChannelBank, audiogram: Audiogram | None = None) -> ChannelBank:
    """Zero channel content whose control level sits below hearing threshold."""
    ag = audiogram if audiogram is not None else Audiogram.normal_hearing()
    thr = gate_threshold_db(ag, bank.center_freqs, bank.fs)
    mask = bank.control_level_db >= thr[None, :, None]
    return ChannelBank(center_freqs=bank.center_freqs, fs=bank.fs,
                       signals=np.where(mask, bank.signals, 0.0),
                       control_level_db=bank.control_level_db, mask=mask)


def extract_env_tfs(bank: ChannelBank) -> PeripheralRepresentation:
    """Low-passed Hilbert envelopes plus fine structure below 1.3 kHz."""
    analytic = hilbert(bank.signals, axis=-1)
    b, a = butter(1, ENV_LOWPASS_HZ / (bank.fs / 2.0))
    env = lfilter(b, a, np.abs(analytic), axis=-1)
    tfs_idx = np.where(bank.center_freqs < TFS_MAX_HZ)[0]
    tfs = analytic[:, tfs_idx, :]
    if bank.mask is not None:
        env = np.where(bank.mask, env, 0.0)
        tfs = np.where(bank.mask[:, tfs_idx, :], tfs, 0.0)
    return PeripheralRepresentation(center_freqs=bank.center_freqs, fs=bank.fs,
                                    env=env, tfs=tfs, tfs_channel_indices=tfs_idx)


def process(sig: StereoSignal, audiogram: Audiogram | None = None,
            gate: bool = True) -> PeripheralRepresentation:
    """Full front end: resample, middle ear, filterbank, gate, env/TFS."""
    ag = audiogram if audiogram is not None else Audiogram.normal_hearing()
    s = resample(sig, INTERNAL_RATE_HZ)
    s = middle_ear(s)
    bank = analyze(s, ag)
    if gate:
        bank = apply_threshold(bank, ag)
    return extract_env_tfs(bank)
