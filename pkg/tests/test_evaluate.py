"""Exact kernel evaluation: single rows, marginalization, block path."""

import numpy as np
import pytest

from skn.construct import compile_fixed_output, compile_free_output, edge_unit, invert_chain
from skn.core import BlockMeta, LayerParams, NetworkParams, bin_of, tv_distance
from skn.evaluate import (
    ENUMERATION_CAP,
    EnumerationCapError,
    compose_row_blockwise,
    compose_row_naive,
    full_kernel,
    layer_row,
    product_mass,
)
from skn.harness import sample_kernel


def _random_net(k, m, n, rng, scale=1.0):
    return NetworkParams(
        k, m, n,
        LayerParams(rng.normal(0, scale, (m, k)), rng.normal(0, scale, m)),
        LayerParams(rng.normal(0, scale, (n, m)), rng.normal(0, scale, n)),
    )


class TestLayerRow:
    def test_zero_parameters(self):
        layer = LayerParams(np.zeros((3, 2)), np.zeros(3))
        np.testing.assert_array_equal(layer_row(layer, [0, 1]), [0.5, 0.5, 0.5])

    def test_edge_unit_row(self):
        v, c = edge_unit((0, 0), (1, 0), 0.3, 0.9, alpha=40.0)
        layer = LayerParams(v[None, :], [c])
        assert layer_row(layer, [0, 0])[0] == pytest.approx(0.3, abs=1e-12)
        assert layer_row(layer, [1, 0])[0] == pytest.approx(0.9, abs=1e-12)
        assert layer_row(layer, [0, 1])[0] < 1e-20

    def test_width_mismatch(self):
        layer = LayerParams(np.zeros((1, 2)), np.zeros(1))
        with pytest.raises(ValueError):
            layer_row(layer, [0, 1, 1])


class TestProductMass:
    def test_uniform(self):
        assert product_mass([0.5, 0.5, 0.5], [1, 0, 1]) == 0.125

    def test_single_unit(self):
        assert product_mass([0.3], [1]) == 0.3

    def test_survivor_product_matches_chain(self):
        # The all-zero state of a chain-programmed block carries exactly
        # the first chain outcome's mass.
        chain = invert_chain([0.25, 0.25, 0.25, 0.25])
        on = 1.0 - chain
        assert product_mass(on, [0, 0, 0]) == pytest.approx(0.25, abs=1e-15)
        # Same numbers read as firing probabilities put 1/24 on the
        # all-zero state instead.
        assert product_mass(chain, [0, 0, 0]) == pytest.approx(1 / 24, abs=1e-15)

    def test_masses_sum_to_one(self):
        rng = np.random.default_rng(0)
        p = rng.uniform(0.1, 0.9, size=4)
        total = sum(product_mass(p, bin_of(i, 4)) for i in range(16))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_width_mismatch(self):
        with pytest.raises(ValueError):
            product_mass([0.5], [0, 1])


class TestComposeNaive:
    def test_zero_parameters_uniform(self):
        net = NetworkParams(1, 1, 1,
                            LayerParams(np.zeros((1, 1)), np.zeros(1)),
                            LayerParams(np.zeros((1, 1)), np.zeros(1)))
        for y in ([0], [1]):
            np.testing.assert_array_equal(compose_row_naive(net, y), [0.5, 0.5])

    def test_single_hidden_unit_mixture_identity(self):
        rng = np.random.default_rng(2)
        net = _random_net(1, 1, 2, rng)
        for y in ([0], [1]):
            q = layer_row(net.hidden, y)[0]
            rows = []
            for z in (0, 1):
                p0, p1 = layer_row(net.output, [z])
                rows.append(np.array([(1 - p0) * (1 - p1), p0 * (1 - p1),
                                      (1 - p0) * p1, p0 * p1]))
            expected = (1 - q) * rows[0] + q * rows[1]
            np.testing.assert_allclose(compose_row_naive(net, y), expected, atol=1e-15)

    def test_rows_normalized_random_parameters(self):
        rng = np.random.default_rng(100)
        for seed in range(100):
            k = int(rng.integers(1, 4))
            n = int(rng.integers(1, 4))
            m = int(rng.integers(1, 11))
            net = _random_net(k, m, n, rng, scale=3.0)
            y = bin_of(int(rng.integers(0, 2 ** k)), k)
            row = compose_row_naive(net, y)
            assert abs(row.sum() - 1.0) <= 1e-10
            assert np.all(row >= 0.0)

    def test_cap_error_mentions_blockwise(self):
        m = ENUMERATION_CAP + 1
        net = NetworkParams(1, m, 1,
                            LayerParams(np.zeros((m, 1)), np.zeros(m)),
                            LayerParams(np.zeros((1, m)), np.zeros(1)))
        with pytest.raises(EnumerationCapError, match="blockwise"):
            compose_row_naive(net, [0])


class TestComposeBlockwise:
    def test_matches_naive_on_compiled_networks(self):
        for seed in range(3):
            K = sample_kernel(2, 2, seed=seed, eta=1e-3)
            net = compile_fixed_output(K, alpha=40.0)
            assert net.m == 6
            for y in range(4):
                state = bin_of(y, 2)
                gap = tv_distance(compose_row_blockwise(net, state),
                                  compose_row_naive(net, state))
                assert gap <= 1e-9

    def test_single_block_equals_naive(self):
        K = sample_kernel(1, 2, seed=4, eta=1e-3)
        net = compile_fixed_output(K, alpha=40.0)
        for y in range(2):
            state = bin_of(y, 1)
            gap = tv_distance(compose_row_blockwise(net, state),
                              compose_row_naive(net, state))
            assert gap <= 1e-12

    def test_requires_metadata(self):
        net = NetworkParams(1, 1, 1,
                            LayerParams(np.zeros((1, 1)), np.zeros(1)),
                            LayerParams(np.zeros((1, 1)), np.zeros(1)))
        with pytest.raises(ValueError, match="metadata"):
            compose_row_blockwise(net, [0])

    def test_degenerate_block_size_rejected(self):
        with pytest.raises(ValueError):
            BlockMeta(0, 2)


class TestFullKernel:
    def test_zero_network_all_uniform(self):
        net = NetworkParams(2, 3, 2,
                            LayerParams(np.zeros((3, 2)), np.zeros(3)),
                            LayerParams(np.zeros((2, 3)), np.zeros(2)))
        np.testing.assert_array_equal(full_kernel(net), np.full((4, 4), 0.25))

    def test_rows_indexed_by_input(self):
        K = sample_kernel(2, 2, seed=8, eta=1e-3)
        net = compile_fixed_output(K, alpha=40.0)
        R = full_kernel(net)
        for y in range(4):
            np.testing.assert_array_equal(R[y], compose_row_naive(net, bin_of(y, 2)))

    def test_normalization(self):
        rng = np.random.default_rng(1)
        net = _random_net(2, 5, 3, rng, scale=4.0)
        R = full_kernel(net)
        np.testing.assert_allclose(R.sum(axis=1), 1.0, atol=1e-10)

    def test_unknown_evaluator(self):
        net = _random_net(1, 1, 1, np.random.default_rng(0))
        with pytest.raises(ValueError):
            full_kernel(net, "sampled")

    def test_hidden_unit_order_irrelevant(self):
        # Enumeration results must not depend on unit order: permuting
        # hidden units (and output columns with them) leaves all rows
        # unchanged to within summation noise.
        rng = np.random.default_rng(9)
        net = _random_net(2, 6, 2, rng, scale=2.0)
        perm = rng.permutation(6)
        permuted = NetworkParams(
            2, 6, 2,
            LayerParams(net.hidden.weights[perm], net.hidden.bias[perm]),
            LayerParams(net.output.weights[:, perm], net.output.bias),
        )
        np.testing.assert_allclose(full_kernel(net), full_kernel(permuted), atol=1e-12)


class TestSharpnessMonotonicity:
    def test_leakage_shrinks_with_alpha(self):
        for seed in range(3):
            K = sample_kernel(2, 2, seed=seed, eta=1e-3)
            errors = []
            for alpha in (5.0, 10.0, 20.0, 40.0):
                net = compile_fixed_output(K, alpha=alpha)
                R = full_kernel(net)
                errors.append(max(tv_distance(K[y], R[y]) for y in range(4)))
            assert all(b <= a + 1e-12 for a, b in zip(errors, errors[1:]))

    def test_free_construction_also_monotone(self):
        row = np.array([0.4, 0.3, 0.2, 0.1])
        K = np.vstack([row, row])
        errors = []
        for alpha in (5.0, 10.0, 20.0, 40.0):
            net, _ = compile_free_output(K, alpha=alpha)
            R = full_kernel(net)
            errors.append(max(tv_distance(K[y], R[y]) for y in range(2)))
        assert all(b <= a + 1e-12 for a, b in zip(errors, errors[1:]))
