import numpy as np
import pytest

from oem_sync.linalg import SpaceConfig, SparseOperator, annihilation, expect, kron3, pauli, product_state
from oem_sync.model import (
    HarmonicCoefficient,
    ModelError,
    ModelParams,
    TimeDependentHamiltonian,
    build_qm_only,
    build_reference_drive,
    build_rotated_hamiltonian,
    build_static_hamiltonian,
    build_total_hamiltonian,
    collapse_channels,
    collapse_operators,
    standard_observables,
)

SPACE = SpaceConfig(n_mech=4, n_cav=3)


def test_reference_parameter_set():
    p = ModelParams.paper_fig2()
    assert (p.E_J, p.g_q, p.Delta, p.g_o) == (1.2, 0.04, 1.0, 0.38)
    assert (p.A_lp, p.A_lr, p.Omega, p.kappa, p.gamma) == (0.6, 0.08, 1.0, 1.4, 0.015)
    assert p.omega_m == 1.0 and p.epsilon == 0.0


def test_params_invariants():
    with pytest.raises(ModelError):
        ModelParams.paper_fig2(kappa=-1.0)
    with pytest.raises(ModelError):
        ModelParams.paper_fig2(omega_m=0.0)
    with pytest.raises(ModelError):
        ModelParams.paper_fig2(A_lp=-0.1)
    with pytest.raises(ModelError):
        ModelParams.paper_fig2(E_J=float("nan"))


class TestStaticHamiltonian:
    def test_free_mechanical_energy(self):
        p = ModelParams.paper_fig2(E_J=0.0, g_q=0.0, g_o=0.0, A_lp=0.0, A_lr=0.0, Delta=0.0)
        h = build_static_hamiltonian(p, SPACE)
        psi = product_state(SPACE, (1.0, 0.0), mech_fock=2, cav_fock=0)
        assert expect(h, psi) == pytest.approx(2.0, abs=1e-12)

    def test_hermitian_at_reference_parameters(self):
        h = build_static_hamiltonian(ModelParams.paper_fig2(), SPACE)
        assert h.hermiticity_defect() < 1e-12

    def test_decoupled_sectors(self):
        # oracle: entrywise scan of the subsystem indices touched by each entry
        p = ModelParams.paper_fig2(g_q=0.0, g_o=0.0, A_lp=0.0)
        h = build_static_hamiltonian(p, SPACE)
        for r, c in zip(h.rows, h.cols):
            qa, ma, ca = SPACE.decompose(int(r))
            qb, mb, cb = SPACE.decompose(int(c))
            changed = (qa != qb) + (ma != mb) + (ca != cb)
            assert changed <= 1

    def test_coupling_removal_is_exactly_one_term(self):
        p = ModelParams.paper_fig2()
        p0 = ModelParams.paper_fig2(g_o=0.0)
        b = annihilation(SPACE.n_mech)
        a = annihilation(SPACE.n_cav)
        term = kron3(
            SparseOperator.identity(2), b.dagger() + b, a.dagger() @ a
        )
        diff = build_static_hamiltonian(p0, SPACE) - build_static_hamiltonian(p, SPACE)
        assert diff.max_abs_diff(p.g_o * term) < 1e-14

    def test_requires_cavity_slot(self):
        with pytest.raises(Exception):
            build_static_hamiltonian(ModelParams.paper_fig2(), SpaceConfig(n_mech=4, n_cav=1))


class TestReferenceDrive:
    def test_zero_amplitude_is_empty(self):
        pairs = build_reference_drive(ModelParams.paper_fig2(A_lr=0.0), SPACE)
        assert pairs == []

    def test_half_period_phase(self):
        p = ModelParams.paper_fig2()
        pairs = build_reference_drive(p, SPACE)
        t = np.pi / p.Omega
        total = SparseOperator.zeros(SPACE.total_dim)
        for op, coeff in pairs:
            total = total + coeff(t) * op
        a = annihilation(SPACE.n_cav)
        expected = (-1j * p.A_lr) * (
            kron3(SparseOperator.identity(2), SparseOperator.identity(4), a.dagger())
            - kron3(SparseOperator.identity(2), SparseOperator.identity(4), a)
        )
        assert total.max_abs_diff(expected) < 1e-14

    def test_time_zero_matches_primary_drive_form(self):
        p = ModelParams.paper_fig2()
        h = TimeDependentHamiltonian(
            SparseOperator.zeros(SPACE.total_dim), tuple(build_reference_drive(p, SPACE))
        )
        a = annihilation(SPACE.n_cav)
        expected = (1j * p.A_lr) * (
            kron3(SparseOperator.identity(2), SparseOperator.identity(4), a.dagger())
            - kron3(SparseOperator.identity(2), SparseOperator.identity(4), a)
        )
        assert h.evaluate(0.0).max_abs_diff(expected) < 1e-15

    def test_hermitian_at_random_times(self):
        p = ModelParams.paper_fig2()
        h = build_total_hamiltonian(p, SPACE)
        rng = np.random.default_rng(17)
        for t in rng.uniform(0.0, 200.0, size=100):
            assert h.hermiticity_defect(float(t)) < 1e-12


class TestCollapse:
    def test_no_dissipation(self):
        assert collapse_operators(ModelParams.paper_fig2(kappa=0.0, gamma=0.0), SPACE) == []

    def test_reference_rates(self):
        # oracle: direct matrix multiplication c'c against the rate * number op
        p = ModelParams.paper_fig2()
        channels = collapse_channels(p, SPACE)
        assert [name for name, _ in channels] == ["cavity", "mech"]
        a = annihilation(SPACE.n_cav)
        b = annihilation(SPACE.n_mech)
        ident = SparseOperator.identity
        c_cav = channels[0][1]
        c_mech = channels[1][1]
        n_a = kron3(ident(2), ident(4), a.dagger() @ a)
        n_b = kron3(ident(2), b.dagger() @ b, ident(3))
        assert (c_cav.dagger() @ c_cav).max_abs_diff(p.kappa * n_a) < 1e-13
        assert (c_mech.dagger() @ c_mech).max_abs_diff(p.gamma * n_b) < 1e-13

    def test_reduced_space_skips_cavity(self):
        channels = collapse_channels(ModelParams.paper_fig2(), SpaceConfig(n_mech=4, n_cav=1))
        assert [name for name, _ in channels] == ["mech"]


class TestRotatedBasis:
    def test_sweet_spot_coefficient_is_exact(self):
        p = ModelParams.paper_fig2()
        h = build_rotated_hamiltonian(p, SPACE)
        # basis index 0 is qubit 0, vacuum: every other term vanishes there
        assert h.to_dense()[0, 0] == p.E_J / 2

    def test_equal_bias_splits_coupling_evenly(self):
        p = ModelParams.paper_fig2(epsilon=1.2, g_o=0.0, A_lp=0.0, A_lr=0.0, Delta=0.0)
        h = build_rotated_hamiltonian(p, SPACE)
        b = annihilation(SPACE.n_mech)
        x_m = b.dagger() + b
        ident = SparseOperator.identity
        w = 1.0 / np.sqrt(2.0)
        expected = (
            (0.5 * np.hypot(1.2, 1.2)) * kron3(pauli("z"), ident(4), ident(3))
            + (p.g_q * w) * kron3(pauli("x"), x_m, ident(3))
            + (-p.g_q * w) * kron3(pauli("z"), x_m, ident(3))
            + p.omega_m * kron3(ident(2), b.dagger() @ b, ident(3))
        )
        assert h.max_abs_diff(expected) < 1e-14

    @pytest.mark.parametrize("epsilon", [0.0, 1.2, 0.5])
    def test_isospectral_with_lab_frame(self, epsilon):
        # oracle: dense eigenvalues; a basis change preserves the spectrum
        reduced = SpaceConfig(n_mech=8, n_cav=1)
        p = ModelParams.paper_fig2(epsilon=epsilon, g_o=0.0, A_lp=0.0, A_lr=0.0)
        lab = build_qm_only(p, reduced, mech_drive=(0.0, 0.0)).static
        rotated = build_rotated_hamiltonian(p, reduced)
        lab_eigs = np.linalg.eigvalsh(lab.to_dense())
        rot_eigs = np.linalg.eigvalsh(rotated.to_dense())
        assert np.abs(np.sort(lab_eigs) - np.sort(rot_eigs)).max() < 1e-10

    def test_undefined_mixing_angle(self):
        with pytest.raises(ModelError):
            build_rotated_hamiltonian(ModelParams.paper_fig2(E_J=0.0, epsilon=0.0), SPACE)


class TestReducedModel:
    def test_pure_precession_generator(self):
        reduced = SpaceConfig(n_mech=4, n_cav=1)
        p = ModelParams.paper_fig2(g_q=0.0)
        h = build_qm_only(p, reduced, mech_drive=(0.0, 0.0))
        assert h.pairs == ()
        b = annihilation(4)
        ident = SparseOperator.identity
        expected = (-0.5 * p.E_J) * kron3(pauli("x"), ident(4), ident(1)) + p.omega_m * kron3(
            ident(2), b.dagger() @ b, ident(1)
        )
        assert h.static.max_abs_diff(expected) == 0.0

    def test_zero_drive_matches_full_restriction(self):
        p = ModelParams.paper_fig2()
        reduced = SpaceConfig(n_mech=4, n_cav=1)
        h = build_qm_only(p, reduced, mech_drive=(0.0, 0.0))
        # qubit+mech part of the full static Hamiltonian at a trivial cavity
        full = build_static_hamiltonian(p, SPACE)
        psi = product_state(SPACE, (1.0, 1.0), mech_fock=1, cav_fock=0)
        psi_red = product_state(reduced, (1.0, 1.0), mech_fock=1)
        assert expect(h.static, psi_red) == pytest.approx(
            expect(full, psi).real - 0.0, abs=1e-12
        )

    def test_driven_hermiticity(self):
        reduced = SpaceConfig(n_mech=4, n_cav=1)
        h = build_qm_only(ModelParams.paper_fig2(), reduced, mech_drive=(0.1, 1.0))
        rng = np.random.default_rng(23)
        for t in rng.uniform(0.0, 50.0, size=25):
            assert h.hermiticity_defect(float(t)) < 1e-13

    def test_default_drive_follows_reference(self):
        reduced = SpaceConfig(n_mech=4, n_cav=1)
        p = ModelParams.paper_fig2()
        h = build_qm_only(p, reduced)
        assert len(h.pairs) == 2
        assert h.pairs[0].coefficient.amplitude == p.A_lr
        assert h.pairs[0].coefficient.frequency == -p.Omega

    def test_negative_drive_amplitude(self):
        with pytest.raises(ModelError):
            build_qm_only(ModelParams.paper_fig2(), SpaceConfig(4, 1), mech_drive=(-0.1, 1.0))


def test_harmonic_coefficient_conjugate():
    c = HarmonicCoefficient(0.5 + 0.25j, -2.0)
    t = 0.37
    assert c.conjugate()(t) == pytest.approx(np.conj(c(t)))


def test_standard_observables_cover_reduced_space():
    names_full = [name for name, _ in standard_observables(SPACE)]
    assert names_full == ["sx", "sy", "sz", "b", "n_mech", "a", "n_cav"]
    names_reduced = [name for name, _ in standard_observables(SpaceConfig(4, 1))]
    assert names_reduced == ["sx", "sy", "sz", "b", "n_mech"]
