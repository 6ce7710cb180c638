"""Binaural audio quality and loudness prediction with hearing-loss simulation.

A level-dependent gammatone-style filterbank front end feeds two back ends:
a reference/test quality comparator built on spectral coloration, interaural
level differences and the complex interaural correlation coefficient, and a
binaural loudness estimator reporting sones. An audiogram splits hearing
loss into outer/inner hair-cell components that reshape the front end and
attenuate the loudness drive.
"""

from .distortions import DISTORTION_KINDS, distort
from .experiments import run_elc, run_loudness_function, run_slsum
from .loudness import (LoudnessResult, MatchError, loudness_sones, match_level)
from .periphery import (Audiogram, AudiogramError, ChannelBank,
                        PeripheralRepresentation, analyze, apply_threshold,
                        erb_center_frequencies, extract_env_tfs, middle_ear,
                        split_audiogram)
from .quality import QualityReport, overall_quality, predict_quality
from .signals import (CALIBRATION_DB_SPL_AT_UNIT_RMS, INTERNAL_RATE_HZ,
                      EmptyAudioError, SignalError, StereoSignal,
                      UnreadableFileError, UnsupportedEncodingError, load_wav,
                      noise_band_edges, resample, save_wav, synth_noise_band,
                      synth_tone)

__version__ = "0.1.0"

__all__ = [
    "Audiogram", "AudiogramError", "ChannelBank", "DISTORTION_KINDS",
    "EmptyAudioError", "LoudnessResult", "MatchError",
    "PeripheralRepresentation", "QualityReport", "SignalError", "StereoSignal",
    "UnreadableFileError", "UnsupportedEncodingError",
    "CALIBRATION_DB_SPL_AT_UNIT_RMS", "INTERNAL_RATE_HZ",
    "analyze", "apply_threshold", "distort", "erb_center_frequencies",
    "extract_env_tfs", "load_wav", "loudness_sones", "match_level",
    "middle_ear", "noise_band_edges", "overall_quality", "predict_quality",
    "resample", "run_elc", "run_loudness_function", "run_slsum", "save_wav",
    "split_audiogram", "synth_noise_band", "synth_tone",
]
