import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oem_sync.linalg import (
    DensityMatrix,
    DimensionError,
    PureState,
    SpaceConfig,
    SparseOperator,
    annihilation,
    basis_state,
    dagger,
    embed,
    expect,
    kron,
    matmul,
    pauli,
    product_state,
)


def random_sparse(dim, rng, density=0.3):
    mask = rng.random((dim, dim)) < density
    mat = np.where(mask, rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)), 0.0)
    return SparseOperator.from_dense(mat)


class TestSpaceConfig:
    def test_total_dim(self):
        s = SpaceConfig(n_mech=3, n_cav=4)
        assert s.total_dim == 2 * 3 * 4

    def test_minimum_dims(self):
        with pytest.raises(DimensionError):
            SpaceConfig(n_mech=1, n_cav=3)
        with pytest.raises(DimensionError):
            SpaceConfig(n_mech=3, n_cav=0)
        # the reduced model keeps a trivial cavity slot
        assert SpaceConfig(n_mech=3, n_cav=1).total_dim == 6

    def test_index_roundtrip(self):
        s = SpaceConfig(n_mech=3, n_cav=4)
        for i in range(s.total_dim):
            assert s.index(*s.decompose(i)) == i


class TestAnnihilation:
    def test_d3_matrix(self):
        a = annihilation(3).to_dense()
        expected = np.array([[0, 1, 0], [0, 0, np.sqrt(2)], [0, 0, 0]], dtype=complex)
        assert np.array_equal(a, expected)

    @pytest.mark.parametrize("d", [2, 3, 5, 9])
    def test_lowers_one_phonon(self, d):
        a = annihilation(d)
        one = basis_state(d, 1)
        out = a.matvec(one.amplitudes)
        assert np.array_equal(out, basis_state(d, 0).amplitudes)

    def test_commutator_truncation_d4(self):
        # oracle: direct dense multiplication
        a = annihilation(4)
        ad = a.dagger()
        dense_comm = a.to_dense() @ ad.to_dense() - ad.to_dense() @ a.to_dense()
        sparse_comm = (a @ ad) - (ad @ a)
        assert np.array_equal(sparse_comm.to_dense(), dense_comm)
        assert np.allclose(dense_comm, np.diag([1, 1, 1, -3]), atol=1e-14)

    @pytest.mark.parametrize("d", [2, 3, 6, 11])
    def test_truncated_ladder_identity(self, d):
        a = annihilation(d)
        comm = (a @ a.dagger()) - (a.dagger() @ a)
        expected = np.diag(np.array([1.0] * (d - 1) + [-(d - 1.0)], dtype=complex))
        assert np.abs(comm.to_dense() - expected).max() < 1e-12

    def test_rejects_trivial_dimension(self):
        with pytest.raises(DimensionError):
            annihilation(1)


class TestPauli:
    def test_matrices(self):
        assert np.array_equal(pauli("x").to_dense(), np.array([[0, 1], [1, 0]], dtype=complex))
        assert np.array_equal(pauli("y").to_dense(), np.array([[0, -1j], [1j, 0]]))
        assert np.array_equal(pauli("z").to_dense(), np.array([[1, 0], [0, -1]], dtype=complex))

    def test_algebra(self):
        product = pauli("x") @ pauli("y")
        assert product.max_abs_diff(1j * pauli("z")) == 0.0

    @pytest.mark.parametrize("axis", ["x", "y", "z"])
    def test_eigenvalues(self, axis):
        vals = np.linalg.eigvalsh(pauli(axis).to_dense())
        assert np.allclose(sorted(vals), [-1.0, 1.0], atol=1e-14)

    def test_unknown_axis(self):
        with pytest.raises(ValueError):
            pauli("w")


class TestKron:
    def test_identity(self):
        i6 = kron(SparseOperator.identity(2), SparseOperator.identity(3))
        assert i6.max_abs_diff(SparseOperator.identity(6)) == 0.0

    def test_adjoint_identity(self):
        rng = np.random.default_rng(7)
        a, b = random_sparse(3, rng), random_sparse(4, rng)
        assert kron(a, b).dagger().max_abs_diff(kron(a.dagger(), b.dagger())) == 0.0

    def test_against_dense_oracle(self):
        got = kron(pauli("z"), annihilation(3)).to_dense()
        oracle = np.kron(pauli("z").to_dense(), annihilation(3).to_dense())
        assert np.array_equal(got, oracle)

    def test_associativity(self):
        rng = np.random.default_rng(11)
        a, b, c = (random_sparse(d, rng) for d in (2, 3, 2))
        left = kron(kron(a, b), c)
        right = kron(a, kron(b, c))
        assert left.max_abs_diff(right) < 1e-14


class TestEmbed:
    def test_sigma_z_on_vacuum(self):
        s = SpaceConfig(n_mech=3, n_cav=3)
        op = embed(pauli("z"), "qubit", s)
        assert op.dim == 18
        psi = product_state(s, (1.0, 0.0), 0, 0)
        assert expect(op, psi) == pytest.approx(1.0)

    def test_identity_embeds_to_identity(self):
        s = SpaceConfig(n_mech=3, n_cav=4)
        for slot, d in (("qubit", 2), ("mech", 3), ("cav", 4)):
            op = embed(SparseOperator.identity(d), slot, s)
            assert op.max_abs_diff(SparseOperator.identity(s.total_dim)) == 0.0

    def test_disjoint_slots_commute(self):
        s = SpaceConfig(n_mech=3, n_cav=3)
        rng = np.random.default_rng(3)
        x = embed(random_sparse(2, rng, density=0.8), "qubit", s)
        y = embed(random_sparse(3, rng, density=0.8), "mech", s)
        comm = (x @ y) - (y @ x)
        assert comm.max_abs() < 1e-14

    def test_dimension_mismatch(self):
        s = SpaceConfig(n_mech=3, n_cav=3)
        with pytest.raises(DimensionError):
            embed(annihilation(4), "mech", s)


class TestAlgebraOps:
    def test_additive_inverse(self):
        rng = np.random.default_rng(5)
        op = random_sparse(6, rng)
        zero = op + (-1.0) * op
        assert zero.nnz == 0

    def test_dagger_of_imaginary_identity(self):
        op = 1j * SparseOperator.identity(4)
        assert dagger(op).max_abs_diff(-1j * SparseOperator.identity(4)) == 0.0

    def test_matmul_against_dense_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(5):
            a, b = random_sparse(12, rng), random_sparse(12, rng)
            got = matmul(a, b).to_dense()
            oracle = a.to_dense() @ b.to_dense()
            assert np.abs(got - oracle).max() < 1e-13

    def test_matmul_dim_mismatch(self):
        with pytest.raises(DimensionError):
            matmul(SparseOperator.identity(3), SparseOperator.identity(4))

    def test_duplicate_coordinates_coalesce(self):
        op = SparseOperator.from_entries(3, [(0, 1, 1.0), (0, 1, 2.5), (2, 2, -1.0)])
        assert op.nnz == 2
        assert op.to_dense()[0, 1] == 3.5

    def test_rejects_nonfinite_entries(self):
        with pytest.raises(ValueError):
            SparseOperator.from_entries(2, [(0, 0, np.inf)])

    def test_rejects_out_of_range(self):
        with pytest.raises(DimensionError):
            SparseOperator.from_entries(2, [(0, 2, 1.0)])

    def test_immutable(self):
        op = SparseOperator.identity(2)
        with pytest.raises(AttributeError):
            op.dim = 3
        with pytest.raises(ValueError):
            op.data[0] = 5.0


class TestExpect:
    def test_sigma_z_ground(self):
        assert expect(pauli("z"), basis_state(2, 0)) == 1.0

    def test_number_operator(self):
        b = annihilation(5)
        assert expect(b.dagger() @ b, basis_state(5, 2)) == pytest.approx(2.0)

    def test_density_matrix_branch(self):
        rho = DensityMatrix.from_pure(basis_state(2, 1))
        assert expect(pauli("z"), rho) == pytest.approx(-1.0)

    def test_dim_mismatch(self):
        with pytest.raises(DimensionError):
            expect(pauli("z"), basis_state(3, 0))

    @given(st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_hermitian_expectation_is_real(self, seed):
        rng = np.random.default_rng(seed)
        raw = random_sparse(5, rng)
        herm = 0.5 * (raw + raw.dagger())
        vec = rng.normal(size=5) + 1j * rng.normal(size=5)
        state = PureState(vec / np.linalg.norm(vec))
        assert abs(expect(herm, state).imag) < 1e-10


class TestStates:
    def test_pure_state_validation(self):
        with pytest.raises(ValueError):
            PureState(np.array([1.0, 1.0], dtype=complex)).validate()
        PureState(np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)).validate()
        with pytest.raises(ValueError):
            PureState(np.array([1.5], dtype=complex)).validate(normalized=False)

    def test_density_matrix_validation(self):
        rho = DensityMatrix.from_pure(product_state(SpaceConfig(3, 3), (1.0, 1.0), 1, 2))
        rho.validate()
        bad = DensityMatrix(np.array([[0.5, 0.3], [0.1, 0.5]], dtype=complex))
        with pytest.raises(ValueError):
            bad.validate()

    def test_product_state_guards(self):
        s = SpaceConfig(n_mech=3, n_cav=2)
        with pytest.raises(ValueError):
            product_state(s, (0.0, 0.0))
        with pytest.raises(DimensionError):
            product_state(s, (1.0, 0.0), mech_fock=3)


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_dagger_is_involutive(seed):
    rng = np.random.default_rng(seed)
    op = random_sparse(6, rng)
    assert op.dagger().dagger().max_abs_diff(op) == 0.0


@given(st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_matvec_matches_dense(seed):
    rng = np.random.default_rng(seed)
    op = random_sparse(7, rng)
    vec = rng.normal(size=7) + 1j * rng.normal(size=7)
    assert np.abs(op.matvec(vec) - op.to_dense() @ vec).max() < 1e-13
