"""Figure rendering for the experiment drivers.

Each function takes the rows produced by the matching driver in
:mod:`binqual.experiments` and writes one figure; the output format follows
the file extension (SVG by default in the CLI). CSV stays the canonical
artifact, figures are companions.
"""
from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def plot_loudness_function(rows, path) -> None:
    levels = [r[0] for r in rows]
    sones = [r[1] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 4))
    audible = [(l, s) for l, s in zip(levels, sones) if s > 0]
    if audible:
        ax.semilogy([l for l, _ in audible], [s for _, s in audible],
                    "o-", color="black")
    ax.set_xlabel("Level (dB SPL)")
    ax.set_ylabel("Loudness (sone)")
    ax.set_title("Loudness of a 1-kHz tone vs. level")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_elc(rows, path) -> None:
    by_phon = defaultdict(list)
    for freq, phon, level in rows:
        by_phon[phon].append((freq, level))
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for phon in sorted(by_phon):
        pts = sorted(by_phon[phon])
        ax.semilogx([p[0] for p in pts], [p[1] for p in pts],
                    "o-", label=f"{phon:.0f} phon")
    ax.set_xlabel("Frequency (Hz)")
    ax.set_ylabel("Level (dB SPL)")
    ax.set_title("Equal-loudness contours")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_slsum(rows, path) -> None:
    by_ref = defaultdict(list)
    for bandwidth, ref_level, matched in rows:
        by_ref[ref_level].append((bandwidth, matched))
    fig, ax = plt.subplots(figsize=(5, 4))
    for ref_level in sorted(by_ref):
        pts = sorted(by_ref[ref_level])
        ax.semilogx([p[0] for p in pts], [p[1] for p in pts],
                    "o-", label=f"ref {ref_level:.0f} dB SPL")
    ax.set_xlabel("Bandwidth (Hz)")
    ax.set_ylabel("Matched level (dB SPL)")
    ax.set_title("Spectral loudness summation")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
