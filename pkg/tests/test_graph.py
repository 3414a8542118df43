import math

import numpy as np
import pytest

from qcuts3d import (ArgumentError, Volume, apply_hamiltonian, build_graph,
                     dense_hamiltonian, select_pore_seeds, slic3d,
                     supervoxel_means, unary_potentials, weighted_degrees)

from conftest import make_volume


def brute_weights(means, sigma, squared=False):
    n = len(means)
    w = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            d = abs(means[i] - means[j])
            if squared:
                d = d * d
            w[i, j] = math.exp(-d / (2 * sigma ** 2))
    return w


class TestBuildGraph:
    def test_equal_means_give_unit_weight(self):
        g = build_graph([0.4, 0.4], sigma=0.1)
        assert g.weight_matrix()[0, 1] == 1.0

    def test_kernel_value_at_two_sigma_squared(self):
        # oracle: direct evaluation exp(-|d| / (2 sigma^2)) with |d| = 2 sigma^2
        sigma = 0.5
        g = build_graph([0.2, 0.7], sigma=sigma)
        assert abs(0.5 - 2 * sigma ** 2) < 1e-15
        assert np.isclose(g.weight_matrix()[0, 1], math.exp(-1.0), atol=1e-15)

    def test_single_node_graph_has_no_edges(self):
        g = build_graph([0.5])
        assert g.weight_matrix().shape == (1, 1)
        assert g.weight_matrix()[0, 0] == 0.0
        assert weighted_degrees(g).tolist() == [0.0]

    def test_squared_variant(self):
        g = build_graph([0.1, 0.5], sigma=0.2, squared=True)
        expect = math.exp(-(0.4 ** 2) / (2 * 0.04))
        assert np.isclose(g.weight_matrix()[0, 1], expect, atol=1e-15)

    def test_invalid_inputs(self):
        with pytest.raises(ArgumentError):
            build_graph([0.5], sigma=0.0)
        with pytest.raises(ArgumentError):
            build_graph([], sigma=0.1)
        with pytest.raises(ArgumentError):
            build_graph([1.2], sigma=0.1)


class TestWeightedDegrees:
    def test_two_equal_nodes(self):
        g = build_graph([0.5, 0.5])
        assert np.allclose(weighted_degrees(g), [1.0, 1.0])

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        means = rng.random(3)
        g = build_graph(means, sigma=0.17)
        brute = brute_weights(means, 0.17).sum(axis=1)
        assert np.allclose(weighted_degrees(g), brute, atol=1e-12)


class TestSelectPoreSeeds:
    def brute(self, assign, means, axis):
        nz, ny, nx = assign.shape
        seeds = set()
        if axis in ("z", "y"):
            rows = [assign[z, y, :] for z in range(nz) for y in range(ny)]
        else:
            rows = [assign[z, :, x] for z in range(nz) for x in range(nx)]
        for row in rows:
            ids = np.unique(row)
            seeds.add(int(min(ids, key=lambda i: (means[i], i))))
        return np.array(sorted(seeds))

    def test_unique_darkest_per_row(self):
        # stack of four x-rows, each with a strictly darkest supervoxel
        arr = np.array([[[0.1, 0.9], [0.8, 0.2]],
                        [[0.9, 0.3], [0.4, 0.7]]])
        v = make_volume(arr)
        m = slic3d(v, 8)
        means = supervoxel_means(v, m)
        seeds = select_pore_seeds(v, m, means, axis="z")
        assert np.array_equal(seeds, self.brute(m.assignment, means, "z"))

    def test_uniform_ties_go_to_lowest_id(self):
        v = make_volume(np.full((8, 8, 8), 0.5))
        m = slic3d(v, 8)
        means = supervoxel_means(v, m)
        seeds = select_pore_seeds(v, m, means, axis="z")
        expect = np.unique(m.assignment.min(axis=2))
        assert np.array_equal(seeds, expect)

    @pytest.mark.parametrize("axis", ["x", "y", "z"])
    def test_matches_exhaustive_scan_on_phantom(self, dense_pack_48, axis):
        _, vol, _, _ = dense_pack_48
        m = slic3d(vol, 250)
        means = supervoxel_means(vol, m)
        seeds = select_pore_seeds(vol, m, means, axis=axis)
        assert np.array_equal(seeds, self.brute(m.assignment, means, axis))
        assert seeds.size > 0

    def test_seeds_darker_than_median_on_sphere_pack(self, dense_pack_48):
        _, vol, _, _ = dense_pack_48
        m = slic3d(vol, 250)
        means = supervoxel_means(vol, m)
        seeds = select_pore_seeds(vol, m, means)
        assert (means[seeds] < np.median(vol.voxels)).all()


class TestUnaryPotentials:
    def test_explicit_value(self):
        g = build_graph([0.1, 0.5, 0.9])
        phi = unary_potentials(g, [0], phi_seed=10.0)
        assert phi.tolist() == [10.0, 0.0, 0.0]

    def test_all_seeded(self):
        g = build_graph([0.1, 0.5, 0.9])
        phi = unary_potentials(g, [0, 1, 2], phi_seed=3.0)
        assert (phi == 3.0).all()

    def test_default_is_ten_times_max_degree(self):
        rng = np.random.default_rng(1)
        means = rng.random(12)
        g = build_graph(means, sigma=0.2)
        phi = unary_potentials(g, [3, 5])
        expect = 10.0 * brute_weights(means, 0.2).sum(axis=1).max()
        assert np.isclose(phi[3], expect, rtol=1e-12)
        assert phi[phi > 0].size == 2

    def test_empty_seed_set_rejected(self):
        g = build_graph([0.1, 0.9])
        with pytest.raises(ArgumentError):
            unary_potentials(g, [])


class TestApplyHamiltonian:
    def test_zero_vector_maps_to_zero(self):
        g = build_graph([0.1, 0.5, 0.9]).with_seeds([0], 2.0)
        assert np.allclose(apply_hamiltonian(g, np.zeros(3)), 0.0)

    def test_two_node_hand_expansion(self):
        # s_1 = s_2 -> w = 1, d = (1, 1); phi = (alpha, 0); z = (1, -1)
        alpha = 4.0
        g = build_graph([0.3, 0.3]).with_seeds([0], alpha)
        hz = apply_hamiltonian(g, np.array([1.0, -1.0]))
        assert np.allclose(hz, [alpha + 2.0, -2.0], atol=1e-14)

    @pytest.mark.parametrize("sigma", [0.005, 0.05, 0.1, 0.5])
    def test_fast_equals_dense(self, sigma):
        rng = np.random.default_rng(2)
        means = rng.random(200)
        g = build_graph(means, sigma=sigma).with_seeds([0, 7], 5.0)
        z = rng.standard_normal(200)
        fast = apply_hamiltonian(g, z, method="fast")
        dense = apply_hamiltonian(g, z, method="dense")
        assert np.linalg.norm(fast - dense) <= 1e-10 * np.linalg.norm(dense)

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        g = build_graph(rng.random(64), sigma=0.15).with_seeds([1], 3.0)
        a, b = rng.standard_normal(64), rng.standard_normal(64)
        lhs = a @ apply_hamiltonian(g, b)
        rhs = b @ apply_hamiltonian(g, a)
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs))

    def test_laplacian_annihilates_constants(self):
        rng = np.random.default_rng(4)
        g = build_graph(rng.random(80), sigma=0.2)  # phi = 0
        out = apply_hamiltonian(g, np.ones(80))
        assert np.linalg.norm(out) <= 1e-10 * np.linalg.norm(g.degrees)

    def test_positive_definite_with_seeds(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            n = int(rng.integers(3, 40))
            g = build_graph(rng.random(n), sigma=0.25).with_seeds([int(rng.integers(n))])
            vals = np.linalg.eigvalsh(dense_hamiltonian(g))
            assert vals[0] > 0

    def test_length_mismatch(self):
        g = build_graph([0.1, 0.9])
        with pytest.raises(ArgumentError):
            apply_hamiltonian(g, np.zeros(3))

    def test_fast_path_refused_for_squared_kernel(self):
        g = build_graph([0.1, 0.9], squared=True)
        with pytest.raises(ArgumentError):
            g.neighbor_sums(np.ones(2), method="fast")
        # auto falls back to the dense route
        assert np.allclose(apply_hamiltonian(g, np.ones(2)), g.potentials())
