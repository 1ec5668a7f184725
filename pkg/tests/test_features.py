import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from radarsort.domain import ClassificationWindow, MaterialClass as M, RangeAxis
from radarsort.errors import DataError, DetectionError
from radarsort.features import (
    RATIO_CLAMP,
    RATIO_EPS,
    FeatureParams,
    PeakLocations,
    detect_peaks,
    extract_features,
    mean_sweep,
    peak_statistics,
)
from radarsort.simulator import SimConfig, container_for, generate_window, simulate_window


# ---- independent oracles: plain Python loops over the raw frame lists


def oracle_mean_sweep(frames):
    n_bins = len(frames[0])
    out = []
    for b in range(n_bins):
        total = 0.0
        for f in frames:
            total += f[b]
        out.append(total / len(frames))
    return out


def oracle_peaks(sweep, guard):
    n = len(sweep)
    main = 0
    for i in range(n - guard - 1):
        if sweep[i] > sweep[main]:
            main = i
    sec = main + guard + 1
    for i in range(main + guard + 1, n):
        if sweep[i] > sweep[sec]:
            sec = i
    return main, sec


def oracle_stats(series):
    n = len(series)
    mean = sum(series) / n
    var = sum((v - mean) ** 2 for v in series) / (n - 1)
    return mean, var


def oracle_features(frames, guard=3, eps=RATIO_EPS):
    """Pre-clamp feature values recomputed from scratch."""
    main, sec = oracle_peaks(oracle_mean_sweep(frames), guard)
    m_mean, m_var = oracle_stats([f[main] for f in frames])
    s_mean, s_var = oracle_stats([f[sec] for f in frames])
    return (main, sec), [m_mean, s_mean, m_mean / (s_mean + eps), m_var, s_var, m_var / (s_var + eps)]


def window_of(amps):
    amps = np.asarray(amps, dtype=float)
    return ClassificationWindow(amps, RangeAxis(100.0, 2.5, amps.shape[1]), amps.shape[0])


def raw(stats):
    return [
        stats.main_mean,
        stats.secondary_mean,
        stats.amplitude_ratio,
        stats.main_variance,
        stats.secondary_variance,
        stats.variance_ratio,
    ]


# ---- mean_sweep


def test_mean_sweep_constant_frames():
    frame = np.random.default_rng(0).random(120)
    w = window_of(np.tile(frame, (30, 1)))
    assert np.array_equal(mean_sweep(w), frame)


def test_mean_sweep_alternating():
    amps = np.zeros((30, 120))
    amps[::2, 7] = 0.2
    amps[1::2, 7] = 0.4
    assert mean_sweep(window_of(amps))[7] == pytest.approx(0.3, abs=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_mean_sweep_matches_oracle(random_window, seed):
    w = random_window(seed)
    expected = oracle_mean_sweep(w.amplitudes.tolist())
    np.testing.assert_allclose(mean_sweep(w), expected, rtol=0, atol=1e-12)


# ---- detect_peaks


def test_single_spike_tie_breaks_low():
    sweep = np.zeros(120)
    sweep[40] = 1.0
    p = detect_peaks(sweep, 3)
    assert (p.main_bin, p.secondary_bin) == (40, 44)


def test_two_spikes():
    sweep = np.zeros(120)
    sweep[40], sweep[70] = 0.6, 0.3
    p = detect_peaks(sweep, 3)
    assert (p.main_bin, p.secondary_bin) == (40, 70)


def test_secondary_only_searched_far_side():
    sweep = np.zeros(120)
    sweep[40], sweep[20], sweep[60] = 0.9, 0.8, 0.1
    assert detect_peaks(sweep, 3).secondary_bin == 60


def test_guard_excludes_shoulder():
    sweep = np.zeros(120)
    sweep[40:44] = [1.0, 0.9, 0.8, 0.7]
    sweep[50] = 0.1
    assert detect_peaks(sweep, 3).secondary_bin == 50


def test_main_peak_leaves_room_for_secondary():
    sweep = np.zeros(20)
    sweep[-1] = 1.0  # maximum at the far end of the axis
    sweep[5] = 0.5
    p = detect_peaks(sweep, 3)
    assert (p.main_bin, p.secondary_bin) == (5, 19)


def test_detection_error_on_short_sweep():
    with pytest.raises(DetectionError):
        detect_peaks(np.ones(4), 3)
    detect_peaks(np.ones(5), 3)


def test_peak_locations_invariant():
    with pytest.raises(DetectionError):
        PeakLocations(10, 13, 3)


@settings(max_examples=200)
@given(
    sweep=hnp.arrays(np.float64, st.integers(5, 150), elements=st.floats(0, 1)),
    guard=st.integers(0, 3),
)
def test_detect_peaks_matches_scan_oracle(sweep, guard):
    p = detect_peaks(sweep, guard)
    assert (p.main_bin, p.secondary_bin) == oracle_peaks(sweep.tolist(), guard)
    assert p.secondary_bin - p.main_bin > guard


# ---- extract_features


def test_noise_free_metal_window():
    cfg = SimConfig(noise_sigma=0.0)
    w = simulate_window(container_for(M.METAL, 0, cfg), cfg, np.random.default_rng())
    fv = extract_features(w)
    assert fv.secondary_peak_mean == 0.0
    assert fv.secondary_peak_variance == 0.0
    assert fv.peak_amplitude_ratio == RATIO_CLAMP
    assert fv.peak_variance_ratio == min(fv.main_peak_variance / RATIO_EPS, RATIO_CLAMP)


def test_constant_two_peak_frames():
    frame = np.zeros(120)
    frame[40], frame[70] = 0.6, 0.3
    fv = extract_features(window_of(np.tile(frame, (30, 1))))
    assert (fv.main_peak_mean, fv.secondary_peak_mean) == (0.6, 0.3)
    assert (fv.main_peak_variance, fv.secondary_peak_variance) == (0.0, 0.0)
    assert fv.peak_amplitude_ratio == pytest.approx(2.0, abs=1e-5)
    assert fv.peak_amplitude_ratio == 0.6 / (0.3 + RATIO_EPS)
    assert fv.peak_variance_ratio == 0.0


@pytest.mark.parametrize("material", [M.METAL, M.PLASTIC, M.GLASS, M.PAPER, M.EMPTY])
def test_simulated_windows_match_oracle(material):
    cfg = SimConfig(seed=21)
    for j in range(0, 40, 7):
        w, _ = generate_window(material, j, cfg)
        stats = peak_statistics(w)
        peaks, expected = oracle_features(w.amplitudes.tolist())
        assert (stats.peaks.main_bin, stats.peaks.secondary_bin) == peaks
        np.testing.assert_allclose(raw(stats), expected, rtol=0, atol=1e-12)


def test_ratios_are_clamped():
    amps = np.zeros((30, 120))
    amps[:, 40] = np.linspace(0.5, 0.9, 30)  # varying main, flat zero secondary
    fv = extract_features(window_of(amps), FeatureParams(ratio_clamp=50.0))
    assert fv.peak_amplitude_ratio == 50.0
    assert fv.peak_variance_ratio == 50.0


def test_window_needs_two_frames():
    w = ClassificationWindow(np.ones((1, 120)), RangeAxis(), 1)
    with pytest.raises(DataError, match="fewer than 2 frames"):
        extract_features(w)


def _plastic_window(seed):
    w, _ = generate_window(M.PLASTIC, seed, SimConfig(seed=seed))
    return w


@pytest.mark.parametrize("scale", [0.5, 0.9, 3.0])
def test_scale_equivariance(scale):
    # ratio invariance only holds as eps -> 0; use a negligible eps here
    params = FeatureParams(eps=1e-15)
    w = _plastic_window(2)
    base = peak_statistics(w, params)
    scaled = peak_statistics(window_of(w.amplitudes * scale), params)
    assert scaled.peaks == base.peaks
    assert scaled.main_mean == pytest.approx(scale * base.main_mean, rel=1e-12)
    assert scaled.secondary_mean == pytest.approx(scale * base.secondary_mean, rel=1e-12)
    assert scaled.main_variance == pytest.approx(scale**2 * base.main_variance, rel=1e-9)
    assert scaled.secondary_variance == pytest.approx(scale**2 * base.secondary_variance, rel=1e-9)
    assert scaled.amplitude_ratio == pytest.approx(base.amplitude_ratio, rel=1e-6)


@pytest.mark.parametrize("scale", [0.5, 3.0])
def test_default_eps_ratio_drift_is_bounded(scale):
    w = _plastic_window(2)
    base = peak_statistics(w)
    scaled = peak_statistics(window_of(w.amplitudes * scale))
    # main/(sec+eps) changes by at most eps*|1/(c*sec) - 1/sec| relative
    bound = RATIO_EPS * abs(1 / (scale * base.secondary_mean) - 1 / base.secondary_mean)
    assert abs(scaled.amplitude_ratio / base.amplitude_ratio - 1) <= bound * 1.01


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), perm_seed=st.integers(0, 10_000))
def test_frame_order_invariance(seed, perm_seed):
    w = _plastic_window(seed % 50)
    perm = np.random.default_rng(perm_seed).permutation(w.frames_per_window)
    a = extract_features(w).as_array()
    b = extract_features(window_of(w.amplitudes[perm])).as_array()
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(
    amps=hnp.arrays(
        np.float64,
        st.tuples(st.integers(2, 40), st.integers(5, 60)),
        elements=st.floats(0, 1),
    )
)
def test_features_always_valid(amps):
    fv = extract_features(window_of(amps))
    v = fv.as_array()
    assert np.all(np.isfinite(v)) and np.all(v >= 0)
    assert fv.peak_amplitude_ratio <= RATIO_CLAMP and fv.peak_variance_ratio <= RATIO_CLAMP


@given(value=st.floats(0, 1), n=st.integers(2, 60))
def test_constant_series_has_exactly_zero_variance(value, n):
    amps = np.full((n, 10), value)
    s = peak_statistics(window_of(amps))
    assert s.main_variance == 0.0 and s.secondary_variance == 0.0
    assert s.main_mean == value
