"""Signal containers, stimulus synthesis, WAV I/O and level calibration.

One calibration convention anchors every dB value in the package: a digital
RMS of 1.0 corresponds to 100 dB SPL, so ``level = 100 + 20*log10(rms)``.
Synthesized stimuli are diotic (identical in both ears) and carry 20-ms
raised-cosine on/off ramps; the requested SPL refers to the steady portion
between the ramps.
"""
from __future__ import annotations

import wave
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

#: dB SPL produced by a signal with digital RMS 1.0.
CALIBRATION_DB_SPL_AT_UNIT_RMS = 100.0

#: Sample rate the model stages run at; inputs are resampled on ingestion.
INTERNAL_RATE_HZ = 44100

#: Raised-cosine on/off ramp length for synthesized stimuli.
RAMP_SECONDS = 0.020


class SignalError(ValueError):
    """Invalid signal data or synthesis parameters."""


class UnreadableFileError(SignalError):
    """File is missing or cannot be parsed as RIFF/WAV."""


class UnsupportedEncodingError(SignalError):
    """WAV encoding other than PCM16, PCM24 or float32 (1 or 2 channels)."""


class EmptyAudioError(SignalError):
    """WAV file contains no audio samples."""


def spl_to_rms(level_db_spl: float) -> float:
    """Digital RMS that realizes `level_db_spl` under the calibration."""
    return 10.0 ** ((level_db_spl - CALIBRATION_DB_SPL_AT_UNIT_RMS) / 20.0)


def rms_to_spl(rms):
    """dB SPL of a digital RMS value (or array); 0 maps to -inf."""
    with np.errstate(divide="ignore"):
        return CALIBRATION_DB_SPL_AT_UNIT_RMS + 20.0 * np.log10(rms)


@dataclass
class StereoSignal:
    """Calibrated two-channel sampled waveform.

    Both ears must hold the same number of samples. ``calibration_db_spl``
    records the SPL of a unit-RMS signal and is the same constant everywhere.
    """

    samples_left: np.ndarray
    samples_right: np.ndarray
    fs: float
    calibration_db_spl: float = CALIBRATION_DB_SPL_AT_UNIT_RMS

    def __post_init__(self):
        self.samples_left = np.asarray(self.samples_left, dtype=np.float64)
        self.samples_right = np.asarray(self.samples_right, dtype=np.float64)
        if self.samples_left.ndim != 1 or self.samples_right.ndim != 1:
            raise SignalError("ear signals must be one-dimensional")
        if self.samples_left.shape != self.samples_right.shape:
            raise SignalError("left/right sample counts differ")
        if self.samples_left.size == 0:
            raise SignalError("signal is empty")
        if not self.fs > 0:
            raise SignalError("sample rate must be positive")
        if not (np.isfinite(self.samples_left).all() and np.isfinite(self.samples_right).all()):
            raise SignalError("samples must be finite")

    @property
    def n_samples(self) -> int:
        return self.samples_left.size

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.fs

    @property
    def is_diotic(self) -> bool:
        return np.array_equal(self.samples_left, self.samples_right)

    def ears(self) -> np.ndarray:
        """Samples stacked as a (2, n) array, left ear first."""
        return np.stack([self.samples_left, self.samples_right])

    def rms(self, ear: int | None = None) -> float:
        """RMS of one ear, or of both ears pooled when `ear` is None."""
        if ear is None:
            x = self.ears()
        else:
            x = self.ears()[ear]
        return float(np.sqrt(np.mean(x**2)))

    def level_db_spl(self, ear: int | None = None) -> float:
        return float(rms_to_spl(self.rms(ear)))

    def copy(self) -> "StereoSignal":
        return StereoSignal(self.samples_left.copy(), self.samples_right.copy(),
                            self.fs, self.calibration_db_spl)


def _ramp_length(n: int, fs: float) -> int:
    return min(int(round(RAMP_SECONDS * fs)), n // 2)


def _apply_ramps(x: np.ndarray, fs: float) -> np.ndarray:
    n_ramp = _ramp_length(x.size, fs)
    if n_ramp > 0:
        ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(n_ramp) / n_ramp))
        x[:n_ramp] *= ramp
        x[-n_ramp:] *= ramp[::-1]
    return x


def steady_slice(n: int, fs: float) -> slice:
    """Portion of a synthesized stimulus between the on/off ramps."""
    n_ramp = _ramp_length(n, fs)
    if n - 2 * n_ramp < 1:
        return slice(0, n)
    return slice(n_ramp, n - n_ramp)


def _scale_to_level(x: np.ndarray, level_db_spl: float, fs: float) -> np.ndarray:
    core = x[steady_slice(x.size, fs)]
    rms = np.sqrt(np.mean(core**2))
    if rms <= 0:
        raise SignalError("cannot scale an all-zero stimulus to a target level")
    return x * (spl_to_rms(level_db_spl) / rms)


def synth_tone(freq_hz: float, dur_s: float, level_db_spl: float,
               fs: float = INTERNAL_RATE_HZ) -> StereoSignal:
    """Diotic pure tone at the requested SPL.

    Raises :class:`SignalError` when the frequency is not strictly between
    0 and fs/2 or the duration is not positive.
    """
    if dur_s <= 0:
        raise SignalError("duration must be positive")
    if not 0 < freq_hz < fs / 2:
        raise SignalError(f"tone frequency {freq_hz} Hz must lie below Nyquist ({fs / 2} Hz)")
    n = int(round(dur_s * fs))
    if n < 2:
        raise SignalError("duration too short for the sample rate")
    t = np.arange(n) / fs
    x = np.sin(2 * np.pi * freq_hz * t)
    x = _apply_ramps(x, fs)
    x = _scale_to_level(x, level_db_spl, fs)
    return StereoSignal(x, x.copy(), fs)


def noise_band_edges(center_hz: float, bandwidth_hz: float) -> tuple[float, float]:
    """Band edges of a geometrically centered noise band.

    Solves ``f_lo * f_hi = center**2`` with ``f_hi - f_lo = bandwidth``.
    """
    if center_hz <= 0:
        raise SignalError("center frequency must be positive")
    if bandwidth_hz <= 0:
        raise SignalError("bandwidth must be positive")
    f_lo = 0.5 * (-bandwidth_hz + np.sqrt(bandwidth_hz**2 + 4.0 * center_hz**2))
    return float(f_lo), float(f_lo + bandwidth_hz)


def synth_noise_band(center_hz: float, bandwidth_hz: float, dur_s: float,
                     level_db_spl: float, fs: float = INTERNAL_RATE_HZ,
                     seed: int = 0) -> StereoSignal:
    """Diotic Gaussian noise confined to a geometrically centered band.

    The band is realized by zeroing FFT bins outside [f_lo, f_hi], which
    gives exact edges and bit-identical output for a given seed.
    """
    f_lo, f_hi = noise_band_edges(center_hz, bandwidth_hz)
    if f_hi >= fs / 2:
        raise SignalError(f"band edge {f_hi:.1f} Hz exceeds Nyquist ({fs / 2} Hz)")
    if dur_s <= 0:
        raise SignalError("duration must be positive")
    n = int(round(dur_s * fs))
    if n < 2:
        raise SignalError("duration too short for the sample rate")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    spec = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    spec[(freqs < f_lo) | (freqs > f_hi)] = 0.0
    x = np.fft.irfft(spec, n)
    x = _apply_ramps(x, fs)
    x = _scale_to_level(x, level_db_spl, fs)
    return StereoSignal(x, x.copy(), fs)


def resample(sig: StereoSignal, fs_target: float) -> StereoSignal:
    """Band-limited resampling of both ears; identity when rates match."""
    if fs_target <= 0:
        raise SignalError("target sample rate must be positive")
    if fs_target == sig.fs:
        return sig.copy()
    ratio = Fraction(int(round(fs_target * 1000)), int(round(sig.fs * 1000)))
    ratio = ratio.limit_denominator(1000)
    left = resample_poly(sig.samples_left, ratio.numerator, ratio.denominator)
    right = resample_poly(sig.samples_right, ratio.numerator, ratio.denominator)
    return StereoSignal(left, right, fs_target, sig.calibration_db_spl)


def load_wav(path) -> StereoSignal:
    """Read a PCM16/PCM24/float32 WAV file as a calibrated stereo signal.

    Mono files are duplicated to both ears. Sample values are normalized to
    [-1, 1] full scale; the sample rate is taken from the header.
    """
    path = Path(path)
    try:
        fs, data = wavfile.read(str(path))
    except FileNotFoundError as exc:
        raise UnreadableFileError(f"cannot open {path}: {exc}") from exc
    except Exception as exc:  # scipy raises bare ValueError for malformed RIFF
        msg = str(exc).lower()
        if "unsupported" in msg or "unknown" in msg or "compressed" in msg:
            raise UnsupportedEncodingError(f"{path}: {exc}") from exc
        raise UnreadableFileError(f"cannot parse {path}: {exc}") from exc
    if data.size == 0:
        raise EmptyAudioError(f"{path} contains no samples")
    if data.dtype == np.int16:
        scaled = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        # scipy stores 24-bit PCM in the high bits of int32, so one scale
        # covers both 24- and 32-bit integer PCM
        scaled = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.float32:
        scaled = data.astype(np.float64)
    else:
        raise UnsupportedEncodingError(
            f"{path}: {data.dtype} WAV data is not supported (use PCM16, PCM24 or float32)")
    if scaled.ndim == 1:
        left = right = scaled
    elif scaled.ndim == 2 and scaled.shape[1] == 1:
        left = right = scaled[:, 0]
    elif scaled.ndim == 2 and scaled.shape[1] == 2:
        left, right = scaled[:, 0], scaled[:, 1]
    else:
        raise UnsupportedEncodingError(
            f"{path}: {scaled.shape[1]}-channel audio is not supported")
    return StereoSignal(left.copy(), right.copy(), float(fs))


def save_wav(sig: StereoSignal, path, encoding: str = "float32") -> None:
    """Write a stereo signal as WAV (float32, pcm16 or pcm24)."""
    path = Path(path)
    data = np.stack([sig.samples_left, sig.samples_right], axis=1)
    fs = int(round(sig.fs))
    if encoding == "float32":
        wavfile.write(str(path), fs, data.astype(np.float32))
    elif encoding == "pcm16":
        q = np.clip(np.rint(data * 32768.0), -32768, 32767).astype(np.int16)
        wavfile.write(str(path), fs, q)
    elif encoding == "pcm24":
        q = np.clip(np.rint(data * 8388608.0), -8388608, 8388607).astype("<i4")
        raw = q.tobytes()
        # keep the three low bytes of each little-endian int32
        frames = b"".join(raw[i:i + 3] for i in range(0, len(raw), 4))
        with wave.open(str(path), "wb") as handle:
            handle.setnchannels(2)
            handle.setsampwidth(3)
            handle.setframerate(fs)
            handle.writeframes(frames)
    else:
        raise SignalError(f"unknown encoding {encoding!r}")
