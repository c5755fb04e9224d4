import itertools

import numpy as np
import pytest

from permdecomp.decomposition import Decomposition
from permdecomp.errors import InvalidInputError, ResourceLimitError
from permdecomp.finite import (AtomicSpectralMeasure, MatrixPropagator, StateVector,
                               apply_measure, brute_force_w, exact_partition,
                               exact_partition_enumerated, measure_scalar, polarization_equal)
from permdecomp.generators import random_measure, random_unitary, random_vector
from permdecomp.spaces import PointSet, Whole, interval


def coordinate_measure(dim, points=None):
    eye = np.eye(dim)
    projs = [np.outer(eye[k], eye[k]) for k in range(dim)]
    return AtomicSpectralMeasure(np.arange(dim) if points is None else points, projs)


def naive_w(G, elements):
    """Enumerate every labelling and every subset directly on vectors."""
    data = np.array([e.data for e in elements])
    total = data.sum(axis=0)
    n = len(data)
    best = np.inf
    for labels in itertools.product(range(n), repeat=G.n_atoms):
        labels = np.array(labels)
        worst = 0.0
        for r in range(1, n):
            for I in itertools.combinations(range(n), r):
                psi_I = data[list(I)].sum(axis=0)
                target = G.projector(np.isin(labels, I)) @ total
                worst = max(worst, np.linalg.norm(psi_I - target) / np.linalg.norm(psi_I))
        best = min(best, worst)
    return best


class TestStateVector:
    def test_norm_and_arithmetic(self):
        v = StateVector([3, 4j])
        assert v.dim == 2
        assert v.norm() == pytest.approx(5.0)
        assert np.allclose((v + v - v * 2).data, 0)

    def test_rejects_empty_and_nonfinite(self):
        with pytest.raises(InvalidInputError):
            StateVector([])
        with pytest.raises(InvalidInputError):
            StateVector([1.0, np.nan])

    def test_amplitudes_are_read_only(self):
        v = StateVector([1.0, 2.0])
        with pytest.raises(ValueError):
            v.data[0] = 5


class TestMeasureValidation:
    def test_non_projection_rejected(self):
        with pytest.raises(InvalidInputError):
            AtomicSpectralMeasure([0, 1], [np.eye(2) * 0.5, np.eye(2) * 0.5])

    def test_overlapping_atoms_rejected(self):
        p = np.diag([1.0, 0.0])
        with pytest.raises(InvalidInputError):
            AtomicSpectralMeasure([0, 1], [p, p])

    def test_incomplete_measure_rejected(self):
        with pytest.raises(InvalidInputError):
            AtomicSpectralMeasure([0], [np.diag([1.0, 0.0])])

    def test_duplicate_points_rejected(self):
        with pytest.raises(InvalidInputError):
            coordinate_measure(2, points=[1.0, 1.0])

    def test_multiplicative_on_random_regions(self, rng):
        G = random_measure(rng, 6, 4, n_null=2)
        for _ in range(20):
            a, b = rng.random(G.n_atoms) < 0.5, rng.random(G.n_atoms) < 0.5
            assert np.abs(G.projector(a & b) - G.projector(a) @ G.projector(b)).max() < 1e-10


class TestApplyMeasure:
    def test_whole_space_is_identity(self, rng):
        G = random_measure(rng, 5)
        psi = StateVector(random_vector(rng, 5))
        assert np.allclose(apply_measure(G, Whole(), psi).data, psi.data, atol=1e-12)

    def test_empty_region_gives_zero(self, rng):
        G = random_measure(rng, 5)
        psi = StateVector(random_vector(rng, 5))
        assert apply_measure(G, interval(1e6, 2e6), psi).norm() == 0.0

    def test_coordinate_projection(self):
        G = coordinate_measure(2)
        out = apply_measure(G, PointSet([0.0]), StateVector([2 + 1j, -3.0]))
        assert np.allclose(out.data, [2 + 1j, 0])

    def test_idempotent_and_contracting(self, rng):
        G = random_measure(rng, 6)
        psi = StateVector(random_vector(rng, 6))
        region = interval(hi=float(np.median(G.points)))
        once = apply_measure(G, region, psi)
        assert np.allclose(apply_measure(G, region, once).data, once.data, atol=1e-12)
        assert once.norm() <= psi.norm() + 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            apply_measure(coordinate_measure(2), Whole(), StateVector([1, 2, 3]))


class TestMeasureScalar:
    def test_eigenvector_puts_mass_on_one_atom(self):
        G = coordinate_measure(3, points=[0.5, 1.5, 2.5])
        mu = measure_scalar(G, StateVector([0, 2.0, 0]))
        assert np.allclose(mu.weights, [0, 4, 0])

    def test_symmetric_state(self):
        mu = measure_scalar(coordinate_measure(2), StateVector(np.ones(2) / np.sqrt(2)))
        assert np.allclose(mu.weights, [0.5, 0.5])

    def test_matches_projected_norms(self, rng):
        G = random_measure(rng, 4, 3)
        psi = StateVector(random_vector(rng, 4))
        mu = measure_scalar(G, psi)
        direct = [np.linalg.norm(P @ psi.data) ** 2 for P in G.projectors]
        assert np.allclose(mu.weights, direct, atol=1e-12)
        assert mu.total == pytest.approx(psi.norm2(), abs=1e-10)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            measure_scalar(coordinate_measure(3), StateVector([1, 2]))


class TestPolarization:
    def test_self(self, rng):
        G = random_measure(rng, 5)
        assert polarization_equal(G, G, rng=rng)

    def test_swapped_projectors_differ(self):
        G = coordinate_measure(3)
        H = AtomicSpectralMeasure(G.points, G.projectors[[1, 0, 2]])
        assert not polarization_equal(G, H)

    def test_reordered_listing_equal(self, rng):
        G = random_measure(rng, 6, 4, n_null=1)
        perm = rng.permutation(G.n_atoms)
        H = AtomicSpectralMeasure(G.points[perm], G.projectors[perm])
        assert polarization_equal(G, H, rng=rng)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            polarization_equal(coordinate_measure(2), coordinate_measure(3))


class TestBruteForceW:
    def test_exact_split_is_zero(self, rng):
        G = random_measure(rng, 6, 5)
        psi = StateVector(random_vector(rng, 6))
        region = interval(hi=float(np.sort(G.points.ravel())[2]))
        D = [apply_measure(G, region, psi), apply_measure(G, ~region, psi)]
        assert brute_force_w(G, D).value < 1e-12

    def test_finest_exact_decomposition_is_zero(self, rng):
        G = random_measure(rng, 5, 5)
        psi = StateVector(random_vector(rng, 5))
        D = [StateVector(P @ psi.data) for P in G.projectors]
        assert brute_force_w(G, D).value < 1e-12

    def test_two_atom_fixture(self):
        # elements Psi/2 +- eps e_2 of Psi = (1, 1)/sqrt 2
        G = coordinate_measure(2)
        psi = np.ones(2) / np.sqrt(2)
        eps = 0.1
        D = [StateVector(psi / 2 + [0, eps]), StateVector(psi / 2 - [0, eps])]
        oracle = naive_w(G, D)
        assert oracle == pytest.approx(1.0, abs=1e-12)
        assert brute_force_w(G, D).value == pytest.approx(oracle, abs=1e-12)

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_naive_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        dim = int(rng.integers(3, 5))
        G = random_measure(rng, dim, int(rng.integers(2, dim + 1)), n_null=1)
        n = int(rng.integers(2, 4))
        D = [StateVector(random_vector(rng, dim)) for _ in range(n)]
        assert brute_force_w(G, D).value == pytest.approx(naive_w(G, D), rel=1e-9, abs=1e-12)

    def test_atom_bound(self, rng):
        G = coordinate_measure(16)
        D = [StateVector(random_vector(rng, 16)) for _ in range(2)]
        with pytest.raises(ResourceLimitError):
            brute_force_w(G, D)

    def test_vanishing_element_rejected(self):
        G = coordinate_measure(2)
        with pytest.raises(InvalidInputError):
            brute_force_w(G, [StateVector([1.0, 1.0]), StateVector([0.0, 0.0])])

    def test_dependent_decomposition_rejected(self):
        v = StateVector([1.0, 1.0])
        with pytest.raises(InvalidInputError):
            Decomposition([v, v * -1])


class TestExactPartition:
    @pytest.mark.parametrize("seed", range(10))
    def test_dominant_labelling_agrees_with_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        G = random_measure(rng, 4, int(rng.integers(2, 5)))
        psi = random_vector(rng, 4)
        labels = rng.integers(0, 2, size=G.n_atoms)
        labels[:2] = [0, 1]  # both sides get an atom
        parts = [G.projector(labels == i) @ psi for i in range(2)]
        assert min(np.linalg.norm(p) for p in parts) > 1e-6
        if seed % 2:
            parts = [parts[0] + 1e-3 * random_vector(rng, 4), parts[1]]
        found = exact_partition(G, parts)
        brute = exact_partition_enumerated(G, parts)
        assert (found is None) == (brute is None)


class TestMatrixPropagator:
    def test_unitary_group(self, rng):
        dim = 5
        z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        U = MatrixPropagator((z + z.conj().T) / 2)
        A, B = U.matrix(0.3), U.matrix(0.9)
        assert np.allclose(A @ B, U.matrix(1.2), atol=1e-12)
        assert np.allclose(A @ A.conj().T, np.eye(dim), atol=1e-12)

    def test_commuting_hamiltonian_preserves_w(self, rng):
        Q = random_unitary(rng, 4)
        G = AtomicSpectralMeasure.from_basis([0, 1, 2], Q, [[0], [1, 2], [3]])
        H = sum(e * P for e, P in zip([0.3, -1.2, 2.0], G.projectors))
        D = Decomposition([StateVector(random_vector(rng, 4)) for _ in range(3)])
        w0 = brute_force_w(G, D).value
        prop = MatrixPropagator(H)
        for t in (0.5, 3.0, 17.0):
            assert brute_force_w(G, D.evolve(prop, t)).value == pytest.approx(w0, abs=1e-8)

    def test_rejects_non_hermitian(self):
        with pytest.raises(InvalidInputError):
            MatrixPropagator([[0, 1], [0, 0]])
