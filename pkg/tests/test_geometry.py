import math

import numpy as np
import pytest

from permdecomp.decomposition import Decomposition
from permdecomp.errors import InvalidInputError
from permdecomp.finite import StateVector
from permdecomp.generators import random_measure, random_vector
from permdecomp.geometry import (ConfigMetric, Trajectory, branch_trajectory, centroid, euclidean,
                                 general_spread, spread, write_trajectories_csv)
from permdecomp.tree import SpatialTree, branches
from permdecomp.wavegrid import (GaussianPacketParams, GridSpec, GridWavefunction,
                                 SplitStepPropagator, make_gaussian, propagate_free)

GRID = GridSpec(4096, 512.0)
U = SplitStepPropagator()


def gaussian(p0=0.0, x0=0.0, sigma_p=1.0, sign=1):
    return make_gaussian(GaussianPacketParams(p0, sigma_p, x0=x0), sign, GRID)


class TestCentroid:
    @pytest.mark.parametrize("x0", [0.0, 4.2, -17.9])
    def test_gaussian(self, x0):
        assert abs(centroid(gaussian(3.0, x0)) - x0) <= GRID.dx

    def test_symmetric_pair(self):
        psi = gaussian(x0=-30.0) + gaussian(x0=30.0)
        assert abs(centroid(psi)) <= GRID.dx

    @pytest.mark.parametrize("t", [1.0, 5.0, 12.0])
    def test_moving_packet(self, t):
        psi = propagate_free(gaussian(10.0), t)
        assert abs(centroid(psi) - 10.0 * t) <= 2 * GRID.dx

    def test_translation(self):
        a, b = gaussian(2.0, 0.0), gaussian(2.0, 7.5)
        assert abs(centroid(b) - centroid(a) - 7.5) <= GRID.dx

    def test_zero_norm(self):
        with pytest.raises(InvalidInputError):
            centroid(gaussian() * 0.0)

    def test_finite_state_needs_measure(self, rng):
        G = random_measure(rng, 4, 4)
        psi = StateVector(random_vector(rng, 4))
        with pytest.raises(InvalidInputError):
            centroid(psi)
        weights = [np.linalg.norm(P @ psi.data) ** 2 for P in G.projectors]
        expected = np.dot(weights, G.points[:, 0]) / sum(weights)
        assert centroid(psi, G) == pytest.approx(expected)


class TestSpread:
    @pytest.mark.parametrize("sigma_p", [0.25, 0.5, 1.0])
    def test_gaussian(self, sigma_p):
        sx = 1.0 / sigma_p
        assert spread(gaussian(sigma_p=sigma_p)) == pytest.approx(sx / math.sqrt(2), rel=1e-4)

    @pytest.mark.parametrize("t", [2.0, 10.0])
    def test_evolved_gaussian(self, t):
        width = math.sqrt(1.0 + t ** 2)
        assert spread(propagate_free(gaussian(2.0), t)) == pytest.approx(width / math.sqrt(2),
                                                                         rel=1e-4)

    def test_single_cell(self):
        data = np.zeros(GRID.n_cells)
        data[1000] = 1.0
        assert spread(GridWavefunction(GRID, data)) <= GRID.dx

    def test_translation_and_phase_invariance(self):
        a = propagate_free(gaussian(2.0, 0.0), 3.0)
        b = propagate_free(gaussian(2.0, 11.0), 3.0) * np.exp(0.7j)
        assert spread(b) == pytest.approx(spread(a), rel=1e-10)


class TestGeneralSpread:
    CANDIDATES = np.arange(-40.0, 40.0 + 1e-9, 0.5)

    def test_matches_closed_forms(self):
        psi = propagate_free(gaussian(2.0, 3.0), 2.0)
        res = general_spread(psi, candidates=self.CANDIDATES)
        assert res.sigma == pytest.approx(spread(psi), abs=1e-6)
        assert res.minimizer[0] == pytest.approx(centroid(psi), abs=1e-6)
        assert not res.ties

    def test_bimodal(self):
        a = 20.0
        psi = (gaussian(x0=-a) + gaussian(x0=a)) * (1 / math.sqrt(2))
        res = general_spread(psi, candidates=self.CANDIDATES)
        assert res.minimizer[0] == pytest.approx(0.0, abs=1e-6)
        assert res.sigma == pytest.approx(math.sqrt(a ** 2 + 0.5), rel=1e-6)

    def test_rescaled_metric(self):
        psi = propagate_free(gaussian(1.0, -2.0), 1.5)
        c = 3.7
        base = general_spread(psi, candidates=self.CANDIDATES)
        scaled = general_spread(psi, metric=lambda p, x: c * euclidean(p, x),
                                candidates=self.CANDIDATES)
        assert scaled.sigma == pytest.approx(c * base.sigma, rel=1e-9)
        assert scaled.minimizer[0] == pytest.approx(base.minimizer[0], abs=1e-9)

    def test_ties_reported(self):
        # with d = sqrt|x - y| every point between two far packets is optimal
        psi = (gaussian(x0=-20.0) + gaussian(x0=20.0)) * (1 / math.sqrt(2))
        res = general_spread(psi, metric=lambda p, x: np.sqrt(euclidean(p, x)),
                             candidates=self.CANDIDATES)
        assert res.ties
        assert len(res.tied_candidates) > 2
        assert np.all(np.abs(res.tied_candidates) < 20)

    def test_empty_search_grid(self):
        with pytest.raises(InvalidInputError):
            general_spread(gaussian(), candidates=np.zeros((0, 1)))


class TestConfigMetric:
    def test_symmetric_and_definite(self, rng):
        metric = ConfigMetric([1.0, 2.0, 5.0], spatial_dim=2)
        x, y = rng.normal(size=6), rng.normal(size=6)
        assert metric(x, y) == pytest.approx(metric(y, x))
        assert metric(x, x) == 0.0 and metric(x, y) > 0

    def test_formula(self):
        metric = ConfigMetric([1.0, 3.0])
        # sqrt((1 * 2^2 + 3 * 1^2) / 4)
        assert metric([0.0, 0.0], [2.0, 1.0]) == pytest.approx(math.sqrt(7 / 4))

    def test_merging_coincident_particles(self, rng):
        metric = ConfigMetric([1.0, 2.5, 4.0], spatial_dim=2)
        x, y = rng.normal(size=6), rng.normal(size=6)
        x[4:], y[4:] = x[2:4], y[2:4]  # particles 1 and 2 share a position
        merged = metric.merge(1, 2)
        assert merged.total_mass == metric.total_mass
        assert metric(x, y) == pytest.approx(merged(metric.drop_particle(x, 2),
                                                    metric.drop_particle(y, 2)), rel=1e-14)

    def test_rejects_nonpositive_masses(self):
        with pytest.raises(InvalidInputError):
            ConfigMetric([1.0, 0.0])


class TestTrajectories:
    def test_two_packet_branches(self):
        t1 = 0.4
        D = Decomposition([gaussian(10.0), gaussian(10.0, sign=-1)])
        T = SpatialTree.from_decompositions(D.total, [(t1, D.evolve(U, t1))], U)
        times = np.linspace(0, 4, 41)
        for b in branches(T):
            sign = 1 if b.leaf_index == 0 else -1
            traj = branch_trajectory(T, b, times)
            before = times < t1
            assert np.all(np.abs(traj.points[before]) <= 2 * GRID.dx)
            assert np.all(np.abs(traj.points[~before] - sign * 10.0 * times[~before])
                          <= 2 * GRID.dx)

    def test_stationary_packet(self):
        psi = gaussian(0.0, 5.0, sigma_p=0.5)
        T = SpatialTree(psi, [], U)
        (b,) = branches(T)
        traj = branch_trajectory(T, b, np.linspace(0, 20, 11))
        assert np.all(np.abs(traj.points - 5.0) <= GRID.dx)

    def test_four_diverging_packets(self):
        momenta = [-15.0, -5.0, 5.0, 15.0]
        parts = [gaussian(p) for p in momenta]
        root = sum(parts[1:], parts[0])
        D1 = Decomposition([U(parts[0] + parts[1], 1.0), U(parts[2] + parts[3], 1.0)])
        D2 = Decomposition([U(p, 2.0) for p in parts])
        T = SpatialTree.from_decompositions(root, [(1.0, D1), (2.0, D2)], U)
        times = np.linspace(2.0, 6.0, 9)
        bs = branches(T)
        assert len(bs) == 4
        for b in bs:
            traj = branch_trajectory(T, b, times)
            slope, intercept = np.polyfit(times, traj.points, 1)
            assert slope == pytest.approx(momenta[b.leaf_index], abs=1e-3)
            assert abs(intercept) <= GRID.dx

    def test_times_must_increase(self):
        with pytest.raises(InvalidInputError):
            Trajectory([0.0, 0.0], [1.0, 2.0])

    def test_csv(self, tmp_path):
        traj = Trajectory([0.0, 1.0], [0.5, 1.5])
        path = tmp_path / "traj.csv"
        write_trajectories_csv(path, [(0, 0.5, traj), (1, 0.5, traj)])
        lines = path.read_text().splitlines()
        assert lines[0] == "t,x,branch_id,prob"
        assert len(lines) == 5
