import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal import hilbert

import binqual as bq
from binqual import quality as Q

FS = 44100.0


# --- framing ----------------------------------------------------------------

def test_frame_rule_keeps_200ms_tail():
    # declared rule: trailing partials of at least 200 ms are kept
    slices = Q.frame_slices(int(1.0 * FS), FS)
    assert len(slices) == 3
    assert slices[-1].stop - slices[-1].start == int(0.2 * FS)


def test_frame_rule_exact_frames():
    slices = Q.frame_slices(int(0.8 * FS), FS)
    assert len(slices) == 2
    assert all(s.stop - s.start == int(0.4 * FS) for s in slices)


def test_frame_rule_drops_short_tail():
    slices = Q.frame_slices(int(0.5 * FS), FS)
    assert len(slices) == 1


def test_frame_rule_rejects_short_signal():
    with pytest.raises(bq.SignalError):
        Q.frame_slices(int(0.1 * FS), FS)


@settings(max_examples=50, deadline=None)
@given(dur=st.floats(0.2, 3.0))
def test_frame_rule_arithmetic(dur):
    n = int(dur * FS)
    frame = int(0.4 * FS)
    tail = n % frame
    expected = n // frame + (1 if tail >= int(0.2 * FS) else 0)
    assert len(Q.frame_slices(n, FS)) == expected


# --- coloration SNRs ---------------------------------------------------------

def two_channel_env(p_ref, p_test, n=17640):
    env_ref = np.sqrt(p_ref) * np.ones((1, n))
    env_test = np.sqrt(p_test) * np.ones((1, n))
    return env_ref, env_test, [slice(0, n)]


def test_snrs_at_ceiling_for_identical_envelopes():
    env_ref, env_test, frames = two_channel_env(1.0, 1.0)
    incr, decr = Q.coloration_snrs(env_ref, env_test, frames)
    assert incr[0] == Q.SNR_CEILING_DB
    assert decr[0] == Q.SNR_CEILING_DB


def test_snr_increment_at_zero_for_doubled_power():
    env_ref, env_test, frames = two_channel_env(1.0, 2.0)
    incr, decr = Q.coloration_snrs(env_ref, env_test, frames)
    assert incr[0] == pytest.approx(0.0, abs=1e-6)
    assert decr[0] == Q.SNR_CEILING_DB


def test_snr_decrement_at_zero_for_removed_power():
    env_ref, env_test, frames = two_channel_env(1.0, 0.0)
    incr, decr = Q.coloration_snrs(env_ref, env_test, frames)
    assert decr[0] == pytest.approx(0.0, abs=1e-6)
    assert incr[0] == Q.SNR_CEILING_DB


def test_snrs_silent_channel_counts_as_undistorted():
    env_ref, env_test, frames = two_channel_env(0.0, 0.0)
    incr, decr = Q.coloration_snrs(env_ref, env_test, frames)
    assert incr[0] == Q.SNR_CEILING_DB
    assert decr[0] == Q.SNR_CEILING_DB


def test_monaural_dprime_zero_without_distortion():
    snr = np.full(19, Q.SNR_CEILING_DB)
    assert Q.monaural_dprime(snr, snr) == 0.0


def test_monaural_dprime_clamps_at_floor():
    snr = np.zeros(19)
    assert Q.monaural_dprime(snr, snr) == Q.DPRIME_MAX_MON


def test_monaural_dprime_monotone_in_snr():
    # halving every linear SNR lowers each dB value by ~3 dB
    base = np.full(19, 30.0)
    d1 = Q.monaural_dprime(base, base)
    d2 = Q.monaural_dprime(base - 10 * np.log10(2), base - 10 * np.log10(2))
    assert d2 > d1


# --- complex interaural correlation ------------------------------------------

def test_correlation_identical_is_one():
    rng = np.random.default_rng(0)
    sig = hilbert(rng.standard_normal(17640))[None, :]
    g = Q.complex_correlation(sig, sig, [slice(0, 17640)])
    assert g[0, 0] == pytest.approx(1.0 + 0.0j, abs=1e-12)


def test_correlation_inverted_is_minus_one():
    rng = np.random.default_rng(1)
    sig = hilbert(rng.standard_normal(17640))[None, :]
    g = Q.complex_correlation(sig, -sig, [slice(0, 17640)])
    assert g[0, 0] == pytest.approx(-1.0 + 0.0j, abs=1e-12)


def test_correlation_independent_noise_small():
    # null distribution over seeds; 99th percentile must stay low
    rng = np.random.default_rng(42)
    n = int(0.4 * FS)
    frames = [slice(0, n)]
    vals = []
    for _ in range(100):
        left = hilbert(rng.standard_normal(n))[None, :]
        right = hilbert(rng.standard_normal(n))[None, :]
        vals.append(abs(Q.complex_correlation(left, right, frames)[0, 0]))
    assert np.percentile(vals, 99) < 0.15


def test_correlation_zero_signal_convention():
    zeros = np.zeros((1, 1000), dtype=complex)
    ones = np.ones((1, 1000), dtype=complex)
    g = Q.complex_correlation(zeros, ones, [slice(0, 1000)])
    assert g[0, 0] == 0.0


def test_correlation_scale_invariant():
    rng = np.random.default_rng(3)
    left = hilbert(rng.standard_normal(4000))[None, :]
    right = hilbert(rng.standard_normal(4000))[None, :]
    frames = [slice(0, 4000)]
    g1 = Q.complex_correlation(left, right, frames)
    g2 = Q.complex_correlation(3.7 * left, 0.2 * right, frames)
    assert g1[0, 0] == pytest.approx(g2[0, 0], abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10000))
def test_correlation_bounded_by_one(seed):
    rng = np.random.default_rng(seed)
    left = hilbert(rng.standard_normal(2000))[None, :]
    right = hilbert(rng.standard_normal(2000))[None, :]
    mix = 0.5 * left + 0.5 * right
    g = Q.complex_correlation(left, mix, [slice(0, 2000)])
    assert abs(g[0, 0]) <= 1 + 1e-9


# --- ILD ----------------------------------------------------------------------

def test_ild_diotic_is_zero():
    env = np.ones((1, 1000))
    ild = Q.ild_db(env, env, [slice(0, 1000)])
    assert ild[0, 0] == 0.0


def test_ild_half_amplitude_is_6db():
    env = np.ones((1, 1000))
    ild = Q.ild_db(env, env / 2, [slice(0, 1000)])
    assert ild[0, 0] == pytest.approx(20 * np.log10(2), abs=1e-9)


def test_ild_clamps_at_30db():
    env = np.ones((1, 1000))
    ild = Q.ild_db(np.zeros_like(env), env, [slice(0, 1000)])
    assert ild[0, 0] == -30.0


def test_ild_both_silent_is_zero():
    env = np.zeros((1, 1000))
    ild = Q.ild_db(env, env, [slice(0, 1000)])
    assert ild[0, 0] == 0.0


def test_ild_invariant_to_diotic_scaling():
    rng = np.random.default_rng(8)
    env_l = np.abs(rng.standard_normal((3, 4000))) + 0.1
    env_r = np.abs(rng.standard_normal((3, 4000))) + 0.1
    frames = [slice(0, 2000), slice(2000, 4000)]
    base = Q.ild_db(env_l, env_r, frames)
    scaled = Q.ild_db(5.0 * env_l, 5.0 * env_r, frames)
    assert np.allclose(scaled, base, atol=1e-9)


def test_ild_one_ear_gain_shifts_by_gain():
    rng = np.random.default_rng(4)
    env = np.abs(rng.standard_normal((3, 4000))) + 0.1
    frames = [slice(0, 2000), slice(2000, 4000)]
    base = Q.ild_db(env, env, frames)
    gained = Q.ild_db(env, env * 10 ** (-6.0 / 20.0), frames)
    assert np.allclose(gained - base, 6.0, atol=1e-9)


# --- binaural combination ------------------------------------------------------

def test_dprime_bin_zero_for_identical():
    coh = np.full((2, 3), 0.9 + 0.1j)
    ild = np.full((2, 3), 1.5)
    d_coh, d_ild, d_bin = Q.binaural_dprimes(coh, coh, ild, ild)
    assert (d_coh, d_ild, d_bin) == (0.0, 0.0, 0.0)


def test_combine_binaural_unit_cases():
    assert Q.combine_binaural(1.0, 0.0) == 1.0
    assert Q.combine_binaural(0.0, np.sqrt(13.0)) == pytest.approx(1.0, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(d_coh=st.floats(0, 50), d_ild=st.floats(0, 50))
def test_combination_algebra(d_coh, d_ild):
    d_bin = Q.combine_binaural(d_coh, d_ild)
    assert d_bin**2 == pytest.approx(d_coh**2 + d_ild**2 / 13.0, rel=1e-12, abs=1e-12)


# --- report -----------------------------------------------------------------

def test_overall_quality_no_distortion():
    report = Q.overall_quality(0.0, 0.0)
    assert report.overall == 1.0


def test_overall_quality_clamps():
    report = Q.overall_quality(Q.DPRIME_MAX_MON, 0.0)
    assert report.q_mon == 0.0
    assert report.overall == 0.0


def test_overall_quality_min_rule():
    report = Q.overall_quality(1.5, 3.0)
    assert report.q_mon == pytest.approx(0.7)
    assert report.q_bin == pytest.approx(0.4)
    assert report.overall == pytest.approx(0.4)


def test_report_csv_shape():
    report = Q.overall_quality(1.0, 1.0, dprime_gamma=0.5, dprime_ild=0.5)
    text = report.to_csv()
    header, row = text.strip().split("\n")
    assert header == "q_mon,q_bin,overall,dprime_mon,dprime_gamma,dprime_ild,dprime_bin"
    assert len(row.split(",")) == 7


# --- full pipeline -----------------------------------------------------------

@pytest.fixture(scope="module")
def base_signal():
    return bq.synth_noise_band(2000, 6400, 0.5, 65, seed=3)


def test_predict_identity(base_signal):
    report = bq.predict_quality(base_signal, base_signal)
    assert report.overall == pytest.approx(1.0, abs=1e-9)
    assert report.dprime_mon == 0.0
    assert report.dprime_bin == 0.0


def test_predict_one_ear_gain_hits_binaural_path(base_signal):
    test = bq.distort(base_signal, "ild_shift", 6.0)
    report = bq.predict_quality(base_signal, test)
    assert report.q_bin < report.q_mon


def test_predict_diotic_tilt_hits_monaural_path(base_signal):
    test = bq.distort(base_signal, "tilt", 10.0)
    report = bq.predict_quality(base_signal, test)
    assert report.q_mon < report.q_bin


def test_predict_rejects_mismatched_lengths(base_signal):
    short = bq.StereoSignal(base_signal.samples_left[:-100],
                            base_signal.samples_right[:-100], base_signal.fs)
    with pytest.raises(bq.SignalError):
        bq.predict_quality(base_signal, short)


def test_predict_rejects_too_short():
    tiny = bq.synth_tone(1000, 0.05, 60)
    with pytest.raises(bq.SignalError):
        bq.predict_quality(tiny, tiny)


def test_predict_symmetric_under_ear_swap(base_signal):
    test = bq.distort(base_signal, "ild_shift", 4.0)
    r1 = bq.predict_quality(base_signal, test)

    def swapped(sig):
        return bq.StereoSignal(sig.samples_right.copy(), sig.samples_left.copy(), sig.fs)

    r2 = bq.predict_quality(swapped(base_signal), swapped(test))
    assert r1.dprime_gamma == pytest.approx(r2.dprime_gamma, abs=1e-9)
    assert r1.dprime_ild == pytest.approx(r2.dprime_ild, abs=1e-9)
    assert r1.overall == pytest.approx(r2.overall, abs=1e-9)
