"""Reference/test audio quality from monaural and binaural feature distances.

All features live on a grid of consecutive 400-ms frames per channel. The
monaural path turns increment/decrement envelope-power SNRs into a single
sensitivity index; the binaural path does the same for the complex interaural
correlation coefficient and interaural level differences, combining them as
``d_bin = sqrt(d_coh**2 + d_ild**2 / 13)``. Each index is normalized to a
quality between 0 and 1 and the overall quality is the worse of the two.

The monaural comparison is made after aligning the test signal's per-ear RMS
to the reference, so it responds to spectral reshaping rather than playback
level; interaural features see the signals exactly as given.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import hilbert

from . import periphery
from .signals import INTERNAL_RATE_HZ, SignalError, StereoSignal, resample

FRAME_SECONDS = 0.4
MIN_TAIL_SECONDS = 0.2

SNR_CEILING_DB = 60.0
SNR_FLOOR_DB = 0.0
DPRIME_MAX_MON = 5.0
DPRIME_MAX_BIN = 5.0

#: Normalizers turning feature differences into sensitivity indices.
SIGMA_COHERENCE = 0.25
SIGMA_ILD_DB = 3.0

ILD_CLAMP_DB = 30.0
ILD_WEIGHT = 1.0 / 13.0

# d' from the combined SNR: d' = A_LOG * log10(snr_linear) + B_LOG, clamped,
# which is linear in dB with d' = max at 0 dB SNR and 0 at the ceiling.
A_LOG_TRANSFORM = -DPRIME_MAX_MON * 10.0 / SNR_CEILING_DB
B_LOG_TRANSFORM = DPRIME_MAX_MON


def frame_slices(n_samples: int, fs: float) -> list[slice]:
    """Consecutive non-overlapping 400-ms frames.

    A trailing partial frame is kept when it spans at least 200 ms and
    dropped otherwise. Signals shorter than 200 ms are rejected.
    """
    frame_len = int(round(FRAME_SECONDS * fs))
    min_tail = int(round(MIN_TAIL_SECONDS * fs))
    if n_samples < min_tail:
        raise SignalError(
            f"signal too short for framing: {n_samples} samples < {min_tail}")
    starts = range(0, n_samples, frame_len)
    slices = []
    for start in starts:
        stop = min(start + frame_len, n_samples)
        if stop - start >= frame_len or stop - start >= min_tail:
            slices.append(slice(start, stop))
    return slices


def frame_mean_power(x: np.ndarray, frames: list[slice]) -> np.ndarray:
    """Mean squared value per frame; output shape (n_frames, ...)."""
    return np.stack([np.mean(x[..., s] ** 2, axis=-1) for s in frames])


def coloration_snrs(env_ref: np.ndarray, env_test: np.ndarray,
                    frames: list[slice]) -> tuple[np.ndarray, np.ndarray]:
    """Increment/decrement envelope-power SNRs per channel, in dB.

    Power the device added shows up in the increment SNR, removed power in
    the decrement SNR. Frame values are averaged in the dB domain; channels
    and frames without any power change sit at the SNR ceiling.
    """
    if env_ref.shape != env_test.shape:
        raise SignalError("reference and test envelope grids differ")
    p_ref = frame_mean_power(env_ref, frames)
    p_test = frame_mean_power(env_test, frames)
    d_incr = np.maximum(p_test - p_ref, 0.0)
    d_decr = np.maximum(p_ref - p_test, 0.0)
    floor = 1e-10 * np.mean(p_ref, axis=0, keepdims=True)

    def snr_db(delta):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = p_ref / np.maximum(delta, floor)
            snr = 10.0 * np.log10(ratio)
        snr = np.where(delta <= floor, SNR_CEILING_DB, snr)
        return np.clip(np.nan_to_num(snr, nan=SNR_CEILING_DB),
                       SNR_FLOOR_DB, SNR_CEILING_DB)

    return snr_db(d_incr).mean(axis=0), snr_db(d_decr).mean(axis=0)


def monaural_dprime(snr_incr_db: np.ndarray, snr_decr_db: np.ndarray,
                    return_snr: bool = False):
    """Sensitivity index for spectral coloration.

    Per-channel increment/decrement SNRs are averaged, their distances from
    the SNR ceiling pooled root-mean-square across channels into one combined
    SNR, and that is mapped through the bounded log transform.
    """
    snr_chan = 0.5 * (np.asarray(snr_incr_db) + np.asarray(snr_decr_db))
    deficit = np.clip(SNR_CEILING_DB - snr_chan, 0.0, SNR_CEILING_DB - SNR_FLOOR_DB)
    snr_mon_db = SNR_CEILING_DB - float(np.sqrt(np.mean(deficit**2)))
    dprime = A_LOG_TRANSFORM * (snr_mon_db / 10.0) + B_LOG_TRANSFORM
    dprime = float(np.clip(dprime, 0.0, DPRIME_MAX_MON))
    if return_snr:
        return dprime, snr_mon_db
    return dprime


def complex_correlation(left: np.ndarray, right: np.ndarray,
                        frames: list[slice]) -> np.ndarray:
    """Normalized complex cross-correlation per frame and channel.

    ``corr = mean(l * conj(r)) / sqrt(mean|l|^2 * mean|r|^2)``; frames where
    either ear has no power yield 0.
    """
    if left.shape != right.shape:
        raise SignalError("left/right feature signals differ in shape")
    rows = []
    for s in frames:
        l_seg, r_seg = left[..., s], right[..., s]
        num = np.mean(l_seg * np.conj(r_seg), axis=-1)
        den = np.sqrt(np.mean(np.abs(l_seg) ** 2, axis=-1)
                      * np.mean(np.abs(r_seg) ** 2, axis=-1))
        with np.errstate(divide="ignore", invalid="ignore"):
            rows.append(np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0))
    return np.stack(rows)


def correlation_validity(left: np.ndarray, right: np.ndarray,
                         frames: list[slice]) -> np.ndarray:
    """Frames/channels where both ears carry power, so correlation is defined."""
    rows = []
    for s in frames:
        p_l = np.mean(np.abs(left[..., s]) ** 2, axis=-1)
        p_r = np.mean(np.abs(right[..., s]) ** 2, axis=-1)
        rows.append((p_l > 0) & (p_r > 0))
    return np.stack(rows)


def ild_db(env_left: np.ndarray, env_right: np.ndarray,
           frames: list[slice]) -> np.ndarray:
    """Interaural level difference per frame and channel, clamped to +-30 dB.

    Channels silent in both ears (gated below threshold) report 0 dB.
    """
    p_left = frame_mean_power(env_left, frames)
    p_right = frame_mean_power(env_right, frames)
    tiny = 1e-30
    ild = 10.0 * np.log10((p_left + tiny) / (p_right + tiny))
    ild = np.where((p_left <= 0) & (p_right <= 0), 0.0, ild)
    return np.clip(ild, -ILD_CLAMP_DB, ILD_CLAMP_DB)


def combine_binaural(dprime_coherence: float, dprime_ild: float) -> float:
    """Weighted optimal combination of the two binaural sensitivities."""
    return float(np.sqrt(dprime_coherence**2 + ILD_WEIGHT * dprime_ild**2))


def binaural_dprimes(coh_ref: np.ndarray, coh_test: np.ndarray,
                     ild_ref: np.ndarray, ild_test: np.ndarray,
                     coh_valid: np.ndarray | None = None
                     ) -> tuple[float, float, float]:
    """RMS feature distances over the frame/channel grid, combined.

    ``coh_valid`` restricts the correlation distance to cells where both
    signals carry interaural information; a channel that merely fell below
    threshold belongs to the coloration feature, not here.
    Returns ``(dprime_coherence, dprime_ild, dprime_bin)``.
    """
    if coh_ref.shape != coh_test.shape or ild_ref.shape != ild_test.shape:
        raise SignalError("reference and test feature grids differ")
    coh_diff_sq = np.abs(coh_ref - coh_test) ** 2
    if coh_valid is not None:
        if coh_valid.any():
            coh_diff_sq = coh_diff_sq[coh_valid]
        else:
            coh_diff_sq = np.zeros(1)
    d_coh = float(np.sqrt(np.mean(coh_diff_sq))) / SIGMA_COHERENCE
    d_ild = float(np.sqrt(np.mean((ild_ref - ild_test) ** 2))) / SIGMA_ILD_DB
    return d_coh, d_ild, combine_binaural(d_coh, d_ild)


@dataclass
class QualityReport:
    """Sensitivity indices and normalized qualities for one ref/test pair."""

    q_mon: float
    q_bin: float
    overall: float
    dprime_mon: float
    dprime_gamma: float
    dprime_ild: float
    dprime_bin: float
    snr_mon_db: float = float("nan")

    CSV_HEADER = "q_mon,q_bin,overall,dprime_mon,dprime_gamma,dprime_ild,dprime_bin"

    def csv_row(self) -> str:
        vals = (self.q_mon, self.q_bin, self.overall, self.dprime_mon,
                self.dprime_gamma, self.dprime_ild, self.dprime_bin)
        return ",".join(f"{v:.6f}" for v in vals)

    def to_csv(self) -> str:
        return f"{self.CSV_HEADER}\n{self.csv_row()}\n"


def overall_quality(dprime_mon: float, dprime_bin: float,
                    dprime_gamma: float = float("nan"),
                    dprime_ild: float = float("nan"),
                    snr_mon_db: float = float("nan")) -> QualityReport:
    """Normalize both sensitivity indices to [0, 1] and take the worse one."""
    if dprime_mon < 0 or dprime_bin < 0:
        raise SignalError("sensitivity indices must be non-negative")
    q_mon = 1.0 - min(dprime_mon / DPRIME_MAX_MON, 1.0)
    q_bin = 1.0 - min(dprime_bin / DPRIME_MAX_BIN, 1.0)
    return QualityReport(q_mon=q_mon, q_bin=q_bin, overall=min(q_mon, q_bin),
                         dprime_mon=dprime_mon, dprime_gamma=dprime_gamma,
                         dprime_ild=dprime_ild, dprime_bin=dprime_bin,
                         snr_mon_db=snr_mon_db)


def _correlation_inputs(rep: periphery.PeripheralRepresentation,
                        q_idx: np.ndarray) -> np.ndarray:
    """Complex per-channel signals feeding the correlation feature.

    Fine-structure channels use the analytic band signal; higher channels use
    the low-passed envelope made analytic again, so the correlation stays
    complex in both regimes.
    """
    cfs = rep.center_freqs
    out = np.empty((2, q_idx.size, rep.env.shape[-1]), dtype=complex)
    tfs_pos = {int(g): k for k, g in enumerate(rep.tfs_channel_indices)}
    env_rows = [i for i, g in enumerate(q_idx) if int(g) not in tfs_pos]
    for i, g in enumerate(q_idx):
        if int(g) in tfs_pos:
            out[:, i, :] = rep.tfs[:, tfs_pos[int(g)], :]
    if env_rows:
        env_sel = rep.env[:, q_idx[env_rows], :]
        out[:, env_rows, :] = hilbert(env_sel, axis=-1)
    return out


def _per_ear_alignment(ref: StereoSignal, test: StereoSignal) -> np.ndarray:
    scales = np.ones(2)
    for ear in range(2):
        ref_rms, test_rms = ref.rms(ear), test.rms(ear)
        if test_rms > 0 and ref_rms > 0:
            scales[ear] = ref_rms / test_rms
    return scales


def predict_quality(ref: StereoSignal, test: StereoSignal,
                    audiogram: periphery.Audiogram | None = None) -> QualityReport:
    """Full pipeline: periphery on both signals, features, combination.

    The caller is responsible for time alignment; both signals must share
    sample rate and length and last at least 200 ms.
    """
    if ref.fs != test.fs:
        raise SignalError("reference and test sample rates differ")
    if ref.n_samples != test.n_samples:
        raise SignalError("reference and test lengths differ")
    ag = audiogram if audiogram is not None else periphery.Audiogram.normal_hearing()

    ref_i = resample(ref, INTERNAL_RATE_HZ)
    test_i = resample(test, INTERNAL_RATE_HZ)
    frames = frame_slices(ref_i.n_samples, INTERNAL_RATE_HZ)

    rep_ref = periphery.process(ref_i, ag)
    rep_test = periphery.process(test_i, ag)

    # monaural path: remove per-ear broadband gain before comparing spectra
    scales = _per_ear_alignment(ref_i, test_i)
    if np.max(np.abs(scales - 1.0)) < 1e-9:
        rep_test_aligned = rep_test
    else:
        aligned = StereoSignal(test_i.samples_left * scales[0],
                               test_i.samples_right * scales[1], INTERNAL_RATE_HZ)
        rep_test_aligned = periphery.process(aligned, ag)

    q_idx = periphery.quality_channel_indices(rep_ref.center_freqs)
    env_ref = rep_ref.env[:, q_idx, :].reshape(2 * q_idx.size, -1)
    env_test = rep_test_aligned.env[:, q_idx, :].reshape(2 * q_idx.size, -1)
    snr_incr, snr_decr = coloration_snrs(env_ref, env_test, frames)
    dprime_mon, snr_mon_db = monaural_dprime(snr_incr, snr_decr, return_snr=True)

    corr_ref_in = _correlation_inputs(rep_ref, q_idx)
    corr_test_in = _correlation_inputs(rep_test, q_idx)
    coh_ref = complex_correlation(corr_ref_in[0], corr_ref_in[1], frames)
    coh_test = complex_correlation(corr_test_in[0], corr_test_in[1], frames)
    valid = (correlation_validity(corr_ref_in[0], corr_ref_in[1], frames)
             & correlation_validity(corr_test_in[0], corr_test_in[1], frames))
    ild_ref = ild_db(rep_ref.env[0, q_idx], rep_ref.env[1, q_idx], frames)
    ild_test = ild_db(rep_test.env[0, q_idx], rep_test.env[1, q_idx], frames)
    d_coh, d_ild, d_bin = binaural_dprimes(coh_ref, coh_test, ild_ref, ild_test,
                                           coh_valid=valid)

    return overall_quality(dprime_mon, d_bin, dprime_gamma=d_coh,
                           dprime_ild=d_ild, snr_mon_db=snr_mon_db)
