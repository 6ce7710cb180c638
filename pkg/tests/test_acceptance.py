"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Expensive experiment CSVs are produced once through the CLI and shared
between the shape criteria and the byte-determinism criterion.
"""
import time

import numpy as np
import pytest
from scipy.signal import hilbert

import binqual as bq
from binqual import cli
from binqual import loudness as L
from binqual import quality as Q

FS = 44100.0


def report(name: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {name}: {status} {detail}".rstrip())
    assert ok, f"{name}: {detail}"


def speech_shaped_noise(dur_s: float, level_db: float, seed: int) -> bq.StereoSignal:
    # white noise shaped flat to 500 Hz, -12 dB/oct above
    rng = np.random.default_rng(seed)
    n = int(dur_s * FS)
    x = rng.standard_normal(n)
    spec = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(n, 1 / FS)
    gain = np.ones_like(freqs)
    high = freqs > 500.0
    gain[high] = 10 ** (-12.0 * np.log2(freqs[high] / 500.0) / 20.0)
    gain[freqs < 50.0] = 0.0
    x = np.fft.irfft(spec * gain, n)
    x *= 10 ** ((level_db - 100.0) / 20.0) / np.sqrt(np.mean(x**2))
    return bq.StereoSignal(x, x.copy(), FS)


@pytest.fixture(scope="module")
def cli_experiment_runs(tmp_path_factory):
    """Each CLI experiment run twice with the same seed; bytes + timing."""
    root = tmp_path_factory.mktemp("experiments")
    runs = {}
    for name in ("loudness-function", "elc", "slsum"):
        payloads = []
        elapsed = []
        for attempt in range(2):
            out = root / f"{name}-{attempt}.csv"
            t0 = time.perf_counter()
            code = cli.main(["experiment", name, "--out", str(out), "--seed", "0"])
            elapsed.append(time.perf_counter() - t0)
            assert code == 0
            payloads.append(out.read_bytes())
        runs[name] = {"bytes": payloads, "elapsed_first": elapsed[0]}
    return runs


def parse_rows(payload: bytes):
    lines = payload.decode().strip().split("\n")
    return [tuple(float(v) for v in line.split(",")) for line in lines[1:]]


def test_quality_identity():
    stimuli = [
        bq.synth_tone(250, 0.5, 55), bq.synth_tone(1000, 0.5, 65),
        bq.synth_tone(4000, 0.4, 75), bq.synth_tone(8000, 0.4, 60),
        bq.synth_noise_band(2000, 3200, 0.5, 65, seed=1),
        bq.synth_noise_band(2000, 200, 0.6, 55, seed=2),
        bq.synth_noise_band(500, 400, 0.5, 70, seed=3),
        bq.synth_noise_band(4000, 6400, 0.4, 60, seed=4),
        speech_shaped_noise(0.5, 65, seed=5),
        speech_shaped_noise(0.8, 50, seed=6),
    ]
    t0 = time.perf_counter()
    worst = 0.0
    for sig in stimuli:
        overall = bq.predict_quality(sig, sig).overall
        worst = max(worst, abs(overall - 1.0))
    elapsed = time.perf_counter() - t0
    report("quality-identity", worst <= 1e-6 and elapsed < 10.0,
           f"(max deviation {worst:.2e}, {elapsed:.1f} s for 10 stimuli)")


def test_quality_monotone_ladders():
    base = bq.synth_noise_band(2000, 6400, 0.5, 65, seed=3)
    noise_overall = [bq.predict_quality(base, bq.distort(base, "additive_noise", snr, seed=7)).overall
                     for snr in (30, 20, 10, 0)]
    tilt_overall = [bq.predict_quality(base, bq.distort(base, "tilt", slope)).overall
                    for slope in (0, 3, 6, 12)]
    ok = (np.all(np.diff(noise_overall) < 0) and np.all(np.diff(tilt_overall) < 0))
    report("quality-monotone-ladder", bool(ok),
           f"(noise {['%.3f' % q for q in noise_overall]}, "
           f"tilt {['%.3f' % q for q in tilt_overall]})")


def test_path_selectivity():
    base = bq.synth_noise_band(2000, 6400, 0.5, 65, seed=3)
    gain_report = bq.predict_quality(base, bq.distort(base, "ild_shift", 6.0))
    tilt_report = bq.predict_quality(base, bq.distort(base, "tilt", 10.0))
    ok = (gain_report.q_bin < gain_report.q_mon
          and tilt_report.q_mon < tilt_report.q_bin)
    report("path-selectivity", bool(ok),
           f"(one-ear gain: q_bin={gain_report.q_bin:.3f} < q_mon={gain_report.q_mon:.3f}; "
           f"tilt: q_mon={tilt_report.q_mon:.3f} < q_bin={tilt_report.q_bin:.3f})")


def test_binaural_combination_algebra():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(1000):
        d_coh, d_ild = rng.uniform(0, 20, size=2)
        d_bin = Q.combine_binaural(d_coh, d_ild)
        target = d_coh**2 + d_ild**2 / 13.0
        worst = max(worst, abs(d_bin**2 - target) / max(target, 1e-300))
    report("combination-algebra", worst <= 1e-12, f"(max rel err {worst:.2e})")


def test_correlation_against_brute_force():
    rng = np.random.default_rng(13)
    worst = 0.0
    max_mag = 0.0
    for _ in range(100):
        n = rng.integers(500, 4000)
        left = hilbert(rng.standard_normal(n))
        mix = rng.uniform(0, 1)
        right = mix * left + (1 - mix) * hilbert(rng.standard_normal(n))
        frames = [slice(0, n)]
        module_val = Q.complex_correlation(left[None, :], right[None, :], frames)[0, 0]
        # brute force straight from the definition
        num = np.sum(left * np.conj(right)) / n
        den = np.sqrt(np.mean(np.abs(left) ** 2) * np.mean(np.abs(right) ** 2))
        brute = num / den
        worst = max(worst, abs(module_val - brute))
        max_mag = max(max_mag, abs(module_val))
    report("correlation-oracle", worst <= 1e-9 and max_mag <= 1 + 1e-9,
           f"(max |diff| {worst:.2e}, max |corr| {max_mag:.12f})")


def test_loudness_anchors():
    L.sone_transform_params.cache_clear()
    t0 = time.perf_counter()
    one_sone = bq.loudness_sones(bq.synth_tone(1000, 0.5, 40)).sones
    s60 = bq.loudness_sones(bq.synth_tone(1000, 0.5, 60)).sones
    s70 = bq.loudness_sones(bq.synth_tone(1000, 0.5, 70)).sones
    silent = bq.loudness_sones(
        bq.StereoSignal(np.zeros(22050), np.zeros(22050), FS)).sones
    elapsed = time.perf_counter() - t0
    ratio = s70 / s60
    ok = (abs(one_sone - 1.0) <= 0.1 and 1.8 <= ratio <= 2.3
          and silent == 0.0 and elapsed < 5.0)
    report("loudness-anchors", bool(ok),
           f"(40 dB -> {one_sone:.3f} sone, 60->70 ratio {ratio:.2f}, "
           f"silence {silent}, {elapsed:.1f} s)")


def test_elc_shape(cli_experiment_runs):
    run = cli_experiment_runs["elc"]
    header = run["bytes"][0].decode().split("\n")[0]
    assert header == "freq_hz,phon,level_db_spl"
    rows = parse_rows(run["bytes"][0])
    contours = {}
    for freq, phon, level in rows:
        contours.setdefault(phon, {})[freq] = level
    level_100 = contours[40.0][100.0]
    phons = sorted(contours)
    no_cross = True
    for low, high in zip(phons, phons[1:]):
        shared = set(contours[low]) & set(contours[high])
        if not all(contours[high][f] > contours[low][f] for f in shared):
            no_cross = False
    ok = level_100 >= 50.0 and no_cross and run["elapsed_first"] < 120.0
    report("elc-shape", bool(ok),
           f"(40 phon at 100 Hz -> {level_100:.1f} dB SPL, "
           f"crossings: {not no_cross}, {run['elapsed_first']:.0f} s)")


def test_spectral_summation(cli_experiment_runs):
    run = cli_experiment_runs["slsum"]
    rows = parse_rows(run["bytes"][0])
    at_65 = {bw: matched for bw, ref, matched in rows if ref == 65.0}
    bandwidths = sorted(at_65)
    matched = [at_65[bw] for bw in bandwidths]
    monotone = all(a >= b - 1e-9 for a, b in zip(matched, matched[1:]))
    excess_200 = at_65[200.0] - 65.0
    ok = monotone and excess_200 >= 3.0 and run["elapsed_first"] < 120.0
    report("spectral-summation", bool(ok),
           f"(matched {['%.1f' % m for m in matched]} for {bandwidths}, "
           f"200-Hz excess {excess_200:.1f} dB, {run['elapsed_first']:.0f} s)")


def test_hearing_loss_behavior():
    flat40 = bq.split_audiogram([125.0, 8000.0], [40.0, 40.0])
    ratios = {}
    for level in (50.0, 100.0):
        nh = bq.loudness_sones(bq.synth_tone(1000, 0.5, level)).sones
        hi = bq.loudness_sones(bq.synth_tone(1000, 0.5, level), flat40).sones
        ratios[level] = hi / nh
    ok = ratios[50.0] < 0.5 and ratios[100.0] > ratios[50.0]
    report("hearing-loss-recruitment", bool(ok),
           f"(HI/NH at 50 dB {ratios[50.0]:.4f}, at 100 dB {ratios[100.0]:.3f})")


def test_binaural_inhibition_ratio():
    tone = bq.synth_tone(1000, 0.5, 60)
    mono = bq.StereoSignal(tone.samples_left, np.zeros_like(tone.samples_right), FS)
    ratio = bq.loudness_sones(tone).sones / bq.loudness_sones(mono).sones
    ok = 1.2 < ratio < 1.8
    report("binaural-inhibition", bool(ok), f"(diotic/monaural {ratio:.3f})")


def test_cli_determinism(cli_experiment_runs):
    mismatches = [name for name, run in cli_experiment_runs.items()
                  if run["bytes"][0] != run["bytes"][1]]
    report("cli-determinism", not mismatches,
           f"(byte-identical CSVs for {sorted(cli_experiment_runs)})"
           if not mismatches else f"(mismatch in {mismatches})")
