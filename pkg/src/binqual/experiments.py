"""Drivers for the three loudness evaluations, emitting CSV-ready rows.

* loudness function: sones for a 1-kHz tone from 0 to 100 dB SPL;
* equal-loudness contours: tone levels matched to a 1-kHz reference for
  0 to 50 phon across 100 Hz to 10 kHz (0 phon doubles as the detection
  threshold contour);
* spectral loudness summation: noise-band levels matched to a 3200-Hz-wide
  reference geometrically centered at 2 kHz.

Stimuli are diotic by default; ``monaural=True`` silences the right ear.
"""
from __future__ import annotations

import sys
from typing import Callable, Sequence

import numpy as np

from . import loudness
from .periphery import Audiogram
from .signals import INTERNAL_RATE_HZ, StereoSignal, synth_noise_band, synth_tone

LOUDNESS_TONE_HZ = 1000.0
LOUDNESS_TONE_DUR_S = 0.5
LOUDNESS_LEVELS_DB = tuple(range(0, 101, 10))

ELC_TONE_DUR_S = 0.4
ELC_FREQ_MIN_HZ = 100.0
ELC_FREQ_MAX_HZ = 10000.0
ELC_GRID_POINTS = 12
ELC_PHON_LEVELS = (0, 10, 20, 30, 40, 50)

SLSUM_CENTER_HZ = 2000.0
SLSUM_DUR_S = 1.0
SLSUM_REF_BANDWIDTH_HZ = 3200.0
SLSUM_BANDWIDTHS_HZ = (200.0, 400.0, 800.0, 1600.0, 3200.0, 6400.0)
SLSUM_REF_LEVELS_DB = (45.0, 55.0, 65.0)

LOUDNESS_CSV_HEADER = ["level_db_spl", "sones"]
ELC_CSV_HEADER = ["freq_hz", "phon", "level_db_spl"]
SLSUM_CSV_HEADER = ["bandwidth_hz", "ref_level_db_spl", "matched_level_db_spl"]


def _presented(sig: StereoSignal, monaural: bool) -> StereoSignal:
    if not monaural:
        return sig
    return StereoSignal(sig.samples_left, np.zeros_like(sig.samples_right), sig.fs)


def elc_frequency_grid() -> np.ndarray:
    """Log-spaced tone frequencies including exactly 1 kHz."""
    grid = np.geomspace(ELC_FREQ_MIN_HZ, ELC_FREQ_MAX_HZ, ELC_GRID_POINTS)
    return np.unique(np.concatenate([grid, [1000.0]]))


def run_loudness_function(audiogram: Audiogram | None = None,
                          levels_db: Sequence[float] = LOUDNESS_LEVELS_DB,
                          monaural: bool = False) -> list[tuple[float, float]]:
    """Rows of (level dB SPL, sones) for the 1-kHz loudness-growth sweep."""
    rows = []
    for level in levels_db:
        sig = _presented(synth_tone(LOUDNESS_TONE_HZ, LOUDNESS_TONE_DUR_S, level), monaural)
        rows.append((float(level), loudness.loudness_sones(sig, audiogram).sones))
    return rows


def run_elc(audiogram: Audiogram | None = None,
            phon_levels: Sequence[float] = ELC_PHON_LEVELS,
            monaural: bool = False) -> list[tuple[float, float, float]]:
    """Rows of (frequency Hz, phon, matched level dB SPL).

    The 1-kHz entry equals the phon level by definition. Frequencies whose
    match fails are skipped.
    """
    rows = []
    freqs = elc_frequency_grid()
    for phon in phon_levels:
        reference = _presented(synth_tone(1000.0, ELC_TONE_DUR_S, phon), monaural)
        for freq in freqs:
            if freq == 1000.0:
                rows.append((float(freq), float(phon), float(phon)))
                continue

            def probe(level: float, f: float = float(freq)) -> StereoSignal:
                return _presented(synth_tone(f, ELC_TONE_DUR_S, level), monaural)

            try:
                matched = loudness.match_level(probe, reference, audiogram)
            except loudness.MatchError as exc:
                print(f"elc: skipping {freq:.1f} Hz at {phon} phon: {exc}",
                      file=sys.stderr)
                continue
            rows.append((float(freq), float(phon), float(matched)))
    return rows


def run_slsum(audiogram: Audiogram | None = None,
              ref_levels_db: Sequence[float] = SLSUM_REF_LEVELS_DB,
              bandwidths_hz: Sequence[float] = SLSUM_BANDWIDTHS_HZ,
              seed: int = 0, monaural: bool = False) -> list[tuple[float, float, float]]:
    """Rows of (bandwidth Hz, reference level dB SPL, matched level dB SPL).

    Probe and reference noises share the seed, so the reference-bandwidth
    probe self-matches at the reference level.
    """
    rows = []
    for ref_level in ref_levels_db:
        reference = _presented(
            synth_noise_band(SLSUM_CENTER_HZ, SLSUM_REF_BANDWIDTH_HZ, SLSUM_DUR_S,
                             ref_level, seed=seed), monaural)
        for bandwidth in bandwidths_hz:

            def probe(level: float, bw: float = float(bandwidth)) -> StereoSignal:
                return _presented(
                    synth_noise_band(SLSUM_CENTER_HZ, bw, SLSUM_DUR_S, level,
                                     seed=seed), monaural)

            try:
                matched = loudness.match_level(probe, reference, audiogram)
            except loudness.MatchError as exc:
                print(f"slsum: skipping {bandwidth:.0f} Hz at {ref_level} dB: {exc}",
                      file=sys.stderr)
                continue
            rows.append((float(bandwidth), float(ref_level), float(matched)))
    return rows


def rows_to_csv(header: Sequence[str], rows: Sequence[tuple],
                formats: Sequence[str]) -> str:
    """Render rows as CSV text with a header, '.' decimals and LF endings."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt % value for fmt, value in zip(formats, row)))
    return "\n".join(lines) + "\n"


def loudness_function_csv(rows) -> str:
    return rows_to_csv(LOUDNESS_CSV_HEADER, rows, ["%.1f", "%.6f"])


def elc_csv(rows) -> str:
    return rows_to_csv(ELC_CSV_HEADER, rows, ["%.2f", "%.0f", "%.3f"])


def slsum_csv(rows) -> str:
    return rows_to_csv(SLSUM_CSV_HEADER, rows, ["%.0f", "%.1f", "%.3f"])
