import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oem_sync import analysis
from oem_sync.analysis import (
    GOLDEN_FRACTION,
    BranchLabeling,
    classify_branches,
    drive_phase,
    golden_target_times,
    limit_cycle_stats,
    mech_phase,
    qubit_phases,
    quadratures,
    rotated_qubit_phases,
    stroboscopic_sample,
    sync_order,
)
from oem_sync.solvers import ObservableRecord


class TestQuadratures:
    def test_vacuum(self):
        q, p = quadratures(np.array([0.0 + 0.0j]))
        assert (q[0], p[0]) == (0.0, 0.0)

    def test_real_coherence(self):
        q, p = quadratures(np.array([1.0 + 0.0j]))
        assert (q[0], p[0]) == (2.0, 0.0)

    def test_imaginary_coherence_sign(self):
        # p is chosen so the phase advances with the drive: <b> = -i/2 -> p = +1
        q, p = quadratures(np.array([-0.5j]))
        assert (q[0], p[0]) == (0.0, 1.0)
        q, p = quadratures(np.array([0.5j]))
        assert (q[0], p[0]) == (0.0, -1.0)

    def test_free_rotation_advances_psi(self):
        # <b>(t) = b0 exp(-i w t) must give d(psi)/dt = +w in this convention
        t = np.linspace(0.0, 1.0, 50)
        b = 0.7 * np.exp(-1j * 2.0 * t)
        psi = mech_phase(*quadratures(b))
        dpsi = np.unwrap(psi.values)
        rates = np.diff(dpsi) / np.diff(t)
        assert np.allclose(rates, 2.0, atol=1e-9)


class TestQubitPhases:
    def test_north_pole(self):
        phi, _ = qubit_phases(np.array([[0.0, 0.0, 1.0]]))
        assert phi.values[0] == 0.0 and phi.defined[0]

    def test_equatorial_y(self):
        phi, _ = qubit_phases(np.array([[0.0, 1.0, 0.0]]))
        assert phi.values[0] == pytest.approx(np.pi / 2)

    def test_tan_ratio_oracle(self):
        rng = np.random.default_rng(31)
        bloch = rng.normal(size=(300, 3))
        phi, _ = qubit_phases(bloch)
        mask = np.abs(bloch[:, 2]) > 1e-9
        assert np.allclose(
            np.tan(phi.values[mask]), bloch[mask, 1] / bloch[mask, 2], rtol=1e-9, atol=1e-9
        )

    def test_theta_flags(self):
        bloch = np.array([
            [0.5, 0.3, 0.4],   # fine
            [0.5, 0.0, 1.0],   # sin(phi) = 0 -> undefined
            [0.0, 0.3, 0.4],   # sx = 0 -> undefined
        ])
        _, theta = qubit_phases(bloch)
        assert list(theta.defined) == [True, False, False]
        assert not np.any(np.isnan(theta.values))

    def test_rotated_variant(self):
        phi, _ = rotated_qubit_phases(np.array([[1.0, 0.0, 0.0]]))
        assert phi.values[0] == 0.0
        phi, _ = rotated_qubit_phases(np.array([[0.0, 1.0, 0.0]]))
        assert phi.values[0] == pytest.approx(np.pi / 2)
        rng = np.random.default_rng(5)
        bloch = rng.normal(size=(100, 3))
        phi, _ = rotated_qubit_phases(bloch)
        mask = np.abs(bloch[:, 0]) > 1e-9
        assert np.allclose(np.tan(phi.values[mask]), bloch[mask, 1] / bloch[mask, 0],
                           rtol=1e-9, atol=1e-9)


class TestMechPhase:
    def test_axes(self):
        psi = mech_phase(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        assert psi.values[0] == 0.0
        assert psi.values[1] == pytest.approx(np.pi / 2)

    def test_origin_flagged(self):
        psi = mech_phase(np.array([0.0]), np.array([0.0]))
        assert not psi.defined[0]
        assert not np.isnan(psi.values[0])

    def test_scale_invariance(self):
        rng = np.random.default_rng(8)
        q = rng.normal(size=50)
        p = rng.normal(size=50)
        a = mech_phase(q, p).values
        b = mech_phase(3.7 * q, 3.7 * p).values
        assert np.allclose(a, b, atol=1e-12)


class TestDrivePhase:
    def test_values(self):
        t = np.array([0.0, np.pi, 2 * np.pi])
        phases = drive_phase(t, 1.0)
        assert phases[0] == 0.0
        assert phases[1] == pytest.approx(np.pi)
        assert phases[2] == pytest.approx(0.0, abs=1e-12)

    def test_zero_frequency(self):
        assert np.all(drive_phase(np.linspace(0, 9, 10), 0.0) == 0.0)

    def test_range(self):
        phases = drive_phase(np.linspace(-30, 30, 1000), 2.3)
        assert np.all((phases >= 0.0) & (phases < 2 * np.pi))


def _record(times):
    return ObservableRecord(times=np.asarray(times, dtype=float), expectations={})


class TestStroboscope:
    def test_first_target(self):
        targets = golden_target_times(1.0, 10.0)
        assert targets[0] == 0.0
        assert targets[1] == pytest.approx(2 * np.pi * GOLDEN_FRACTION)
        assert targets[1] == pytest.approx(3.88322, abs=1e-5)

    def test_golden_phases_distinct(self):
        # oracle: direct enumeration of the first 100 selected drive phases
        times = np.arange(0.0, 392.0, 0.01)
        rec = _record(times)
        sub = stroboscopic_sample(rec, 1.0, "golden_strobe")
        phases = drive_phase(sub.times[:100], 1.0)
        gaps = np.abs(phases[:, None] - phases[None, :])
        gaps = np.minimum(gaps, 2 * np.pi - gaps)
        np.fill_diagonal(gaps, np.inf)
        assert gaps.min() > 1e-3

    def test_many_samples_never_collide(self):
        targets = golden_target_times(1.0, 10_000 * 2 * np.pi * GOLDEN_FRACTION)
        phases = np.sort(drive_phase(targets[:10_000], 1.0))
        gaps = np.diff(phases)
        wrap = phases[0] + 2 * np.pi - phases[-1]
        assert min(gaps.min(), wrap) > 1e-6

    def test_uniform_rule_is_identity(self):
        rec = _record(np.linspace(0, 5, 11))
        assert stroboscopic_sample(rec, 1.0, "uniform") is rec

    def test_selects_nearest_samples(self):
        times = np.arange(0.0, 40.0, 0.05)
        rec = _record(times)
        sub = stroboscopic_sample(rec, 1.0, "golden_strobe")
        targets = golden_target_times(1.0, float(times[-1]))
        assert sub.times.shape == targets.shape
        assert np.abs(sub.times - targets).max() <= 0.025 + 1e-12

    def test_zero_frequency_rejected(self):
        with pytest.raises(ValueError):
            stroboscopic_sample(_record(np.linspace(0, 5, 50)), 0.0, "golden_strobe")

    def test_coarse_sampling_rejected(self):
        rec = _record(np.arange(0.0, 100.0, 3.0))
        with pytest.raises(ValueError):
            stroboscopic_sample(rec, 1.0, "golden_strobe")

    def test_unknown_rule(self):
        with pytest.raises(ValueError):
            stroboscopic_sample(_record([0.0, 1.0]), 1.0, "every_other")


class TestClassifier:
    def test_constant_positive(self):
        t = np.linspace(0, 100, 201)
        lab = classify_branches(t, np.full(201, 0.5), 0.1, 10.0)
        assert len(lab.dwell_intervals) == 1
        iv = lab.dwell_intervals[0]
        assert iv.label == "blue" and iv.t_start == 0.0 and iv.t_end == 100.0
        assert np.all(lab.labels == 1)

    def test_square_wave_boundaries(self):
        # oracle: synthetic signal with known switching times
        dt = 0.5
        t = np.arange(0.0, 400.0, dt)
        x = np.where((t // 100) % 2 == 0, 0.5, -0.5)
        lab = classify_branches(t, x, threshold=0.1, min_dwell=10 * dt)
        labels = [iv.label for iv in lab.dwell_intervals]
        assert labels == ["blue", "red", "blue", "red"]
        starts = [iv.t_start for iv in lab.dwell_intervals]
        assert starts == [0.0, 100.0, 200.0, 300.0]

    def test_all_zero_is_transit(self):
        t = np.linspace(0, 50, 101)
        lab = classify_branches(t, np.zeros(101), 0.1, 5.0)
        assert np.all(lab.labels == 0)
        assert lab.dwell_intervals == []

    def test_short_runs_become_transit(self):
        t = np.arange(0.0, 30.0, 1.0)
        x = np.zeros(30)
        x[10:13] = 1.0   # 2 time units above threshold, below min_dwell
        x[13:] = -1.0    # bounded by a long opposite dwell
        lab = classify_branches(t, x, threshold=0.5, min_dwell=5.0)
        assert np.all(lab.labels[:13] == 0)
        assert np.all(lab.labels[13:] == -1)
        assert [iv.label for iv in lab.dwell_intervals] == ["red"]

    def test_hysteresis_keeps_previous_label(self):
        t = np.arange(0.0, 6.0, 1.0)
        x = np.array([0.5, 0.05, -0.05, 0.08, 0.5, 0.5])
        lab = classify_branches(t, x, threshold=0.1, min_dwell=0.0)
        assert np.all(lab.labels == 1)

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        t = np.arange(0.0, 500.0, 0.5)
        x = np.sign(np.sin(t / 40.0)) * 0.4 + rng.normal(0, 0.05, t.size)
        a = classify_branches(t, x)
        b = classify_branches(t, x)
        assert np.array_equal(a.labels, b.labels)
        assert a.dwell_intervals == b.dwell_intervals

    def test_empty_series_rejected(self):
        with pytest.raises(ValueError):
            classify_branches(np.array([]), np.array([]))


class TestSyncOrder:
    def test_identical_series(self):
        phases = np.linspace(0, 20, 100) % (2 * np.pi)
        assert sync_order(phases, phases) == pytest.approx(1.0)

    def test_uniform_grid_vanishes(self):
        a = np.linspace(0.0, 2 * np.pi, 64, endpoint=False)
        assert sync_order(a, np.zeros(64)) < 1e-12

    def test_constant_offset_invariance(self):
        rng = np.random.default_rng(4)
        a = rng.uniform(0, 2 * np.pi, 200)
        assert sync_order(a + np.pi / 3, a) == pytest.approx(1.0)

    def test_excludes_undefined_pairs(self):
        values = np.array([0.0, 1.0, 2.0, 3.0])
        flags = np.array([True, False, True, True])
        a = analysis.PhaseSeries(values, flags)
        s = sync_order(a, np.zeros(4))
        expected = abs(np.mean(np.exp(1j * values[flags])))
        assert s == pytest.approx(expected)

    def test_too_few_pairs(self):
        with pytest.raises(ValueError):
            sync_order(np.array([1.0]), np.array([0.5]))

    @given(st.floats(-10, 10), st.integers(0, 1000))
    @settings(max_examples=25, deadline=None)
    def test_common_shift_property(self, shift, seed):
        rng = np.random.default_rng(seed)
        a = rng.uniform(0, 2 * np.pi, 50)
        b = rng.uniform(0, 2 * np.pi, 50)
        assert sync_order(a + shift, b + shift) == pytest.approx(sync_order(a, b), abs=1e-10)


class TestLimitCycle:
    def test_exact_circle(self):
        angle = np.linspace(0, 2 * np.pi, 100, endpoint=False)
        stats = limit_cycle_stats(2 * np.cos(angle), 2 * np.sin(angle))
        assert stats.mean_radius == pytest.approx(2.0, abs=1e-12)
        assert stats.radial_spread == pytest.approx(0.0, abs=1e-12)
        assert stats.centroid == (pytest.approx(0.0, abs=1e-12), pytest.approx(0.0, abs=1e-12))

    def test_origin_cloud(self):
        stats = limit_cycle_stats(np.zeros(20), np.zeros(20))
        assert stats.mean_radius == 0.0

    def test_noisy_circle_spread(self):
        # oracle: synthetic radial noise of known scale
        rng = np.random.default_rng(12)
        angle = rng.uniform(0, 2 * np.pi, 400)
        radius = 2.0 + rng.normal(0, 0.1, 400)
        stats = limit_cycle_stats(radius * np.cos(angle), radius * np.sin(angle))
        assert 0.05 <= stats.radial_spread <= 0.2

    def test_rotation_invariance(self):
        rng = np.random.default_rng(3)
        q = rng.normal(1.0, 0.5, 120)
        p = rng.normal(-2.0, 0.5, 120)
        base = limit_cycle_stats(q, p)
        cq, cp = base.centroid
        c, s = np.cos(0.7), np.sin(0.7)
        q2 = cq + c * (q - cq) - s * (p - cp)
        p2 = cp + s * (q - cq) + c * (p - cp)
        rotated = limit_cycle_stats(q2, p2)
        assert rotated.mean_radius == pytest.approx(base.mean_radius, abs=1e-9)
        assert rotated.radial_spread == pytest.approx(base.radial_spread, abs=1e-9)

    def test_per_branch(self):
        t = np.arange(40.0)
        q = np.concatenate([np.full(20, 3.0), np.full(20, -3.0)])
        p = np.concatenate([np.ones(20), -np.ones(20)])
        labels = np.concatenate([np.ones(20, np.int8), -np.ones(20, np.int8)])
        labeling = BranchLabeling(labels=labels, dwell_intervals=[], threshold=0.1, min_dwell=0.0)
        stats = limit_cycle_stats(q, p, labeling)
        assert set(stats.per_branch) == {"blue", "red"}
        assert stats.per_branch["blue"].centroid == (3.0, 1.0)

    def test_insufficient_samples(self):
        with pytest.raises(ValueError):
            limit_cycle_stats(np.ones(5), np.ones(5))


@given(st.integers(0, 5000))
@settings(max_examples=30, deadline=None)
def test_phases_stay_in_documented_ranges(seed):
    rng = np.random.default_rng(seed)
    bloch = rng.normal(size=(40, 3))
    phi, theta = qubit_phases(bloch)
    for series in (phi, theta):
        assert np.all(series.values > -np.pi) and np.all(series.values <= np.pi)
    psi = mech_phase(rng.normal(size=40), rng.normal(size=40))
    assert np.all(psi.values > -np.pi) and np.all(psi.values <= np.pi)
