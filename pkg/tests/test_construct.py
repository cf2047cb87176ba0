"""Closed-form constructions: edge units, orthant map, chain inversion,
splitter solving, and the end-to-end compilers."""

import math

import numpy as np
import pytest

from skn.construct import (
    ResidualReport,
    SplitterParams,
    chain_forward,
    compile_distribution,
    compile_fixed_output,
    compile_free_output,
    edge_unit,
    even_share,
    first_layer,
    fixed_output_layer,
    hidden_unit_bounds,
    invert_chain,
    orthant_weights,
    solve_splitter,
    weighted_pair_ratios,
)
from skn.core import all_states, bin_of, clamp_to_interior, logit, sigmoid, tv_distance
from skn.evaluate import full_kernel, layer_row
from skn.harness import sample_kernel


class TestOrthantWeights:
    def test_printed_three_bit_matrix(self):
        W, b = orthant_weights(3)
        expected = np.array([
            [2, -4, 8, -16, 32, -64, 128],
            [-2, 4, 8, -16, -32, 64, 128],
            [-2, -4, -8, 16, 32, 64, 128],
        ])
        np.testing.assert_array_equal(W, expected)
        np.testing.assert_array_equal(b, [-1, -1, -1])

    def test_two_bit_example(self):
        W, b = orthant_weights(2)
        pre = W @ np.array([1, 1, 0]) + b
        np.testing.assert_array_equal(pre, [-3, 1])

    def test_zero_state_lands_in_orthant_zero(self):
        W, b = orthant_weights(3)
        np.testing.assert_array_equal(W @ np.zeros(7, dtype=np.int64) + b, b)

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_exhaustive_classification(self, n):
        W, b = orthant_weights(n)
        N = 2 ** n - 1
        states = all_states(N)
        pre = states @ W.T + b  # exact int64 arithmetic
        assert pre.dtype == np.int64
        assert np.all(pre % 2 != 0), "pre-activations must be odd integers"
        got = (pre > 0).astype(np.int64) @ (1 << np.arange(n, dtype=np.int64))
        expected = np.array([int(i).bit_length() for i in range(2 ** N)])
        np.testing.assert_array_equal(got, expected)


class TestEdgeUnit:
    def test_uniform_pair(self):
        v, c = edge_unit((0, 0), (1, 0), 0.5, 0.5, alpha=40.0)
        np.testing.assert_array_equal(v, [0.0, -80.0])
        assert c == 0.0
        assert sigmoid(v @ np.array([0, 0]) + c) == 0.5
        assert sigmoid(v @ np.array([1, 0]) + c) == 0.5
        assert sigmoid(v @ np.array([0, 1]) + c) <= sigmoid(-80.0)

    def test_prescribed_activations(self):
        v, c = edge_unit((0, 0), (1, 0), 0.3, 0.9, alpha=40.0)
        s_a = v @ np.array([0, 0]) + c
        s_b = v @ np.array([1, 0]) + c
        assert s_a == pytest.approx(-0.8472978603872034, abs=1e-12)
        assert s_b == pytest.approx(2.1972245773362196, abs=1e-12)

    def test_exact_on_edge_and_bounded_off_edge(self):
        rng = np.random.default_rng(5)
        alpha = 40.0
        for _ in range(50):
            k = int(rng.integers(2, 5))
            i = int(rng.integers(0, 2 ** (k - 1)))
            y_a, y_b = bin_of(2 * i, k), bin_of(2 * i + 1, k)
            q_a, q_b = rng.uniform(0.05, 0.95, size=2)
            v, c = edge_unit(y_a, y_b, q_a, q_b, alpha=alpha)
            s_a, s_b = logit(q_a), logit(q_b)
            assert v @ y_a + c == pytest.approx(s_a, abs=1e-12)
            assert v @ y_b + c == pytest.approx(s_b, abs=1e-12)
            bound = -2.0 * alpha + abs(s_a) + abs(s_b - s_a)
            for y in all_states(k):
                if list(y) in (list(y_a), list(y_b)):
                    continue
                assert v @ y + c <= bound + 1e-9

    def test_all_ones_off_edge(self):
        v, c = edge_unit((0, 0, 0), (1, 0, 0), 0.5, 0.5, alpha=40.0)
        assert v @ np.ones(3) + c <= -2 * 40.0

    def test_rejects_non_edge(self):
        with pytest.raises(ValueError):
            edge_unit((0, 0), (1, 1), 0.5, 0.5, alpha=40.0)

    def test_rejects_out_of_floor_targets(self):
        with pytest.raises(ValueError):
            edge_unit((0,), (1,), 0.001, 0.5, alpha=40.0, floor=0.01)


class TestFirstLayer:
    def test_single_pair_single_unit(self):
        layer, meta = first_layer([np.array([0.3]), np.array([0.9])], 1, alpha=40.0)
        assert meta.block_size == 1 and meta.number_of_blocks == 1
        v, c = edge_unit((0,), (1,), 0.3, 0.9, alpha=40.0)
        np.testing.assert_allclose(layer.weights[0], v)
        assert layer.bias[0] == c

    def test_uniform_targets_give_uniform_rows(self):
        products = [np.full(3, 0.5) for _ in range(4)]
        layer, _ = first_layer(products, 2, alpha=40.0)
        for y in range(4):
            row = layer_row(layer, bin_of(y, 2))
            block = y // 2
            np.testing.assert_array_equal(row[3 * block:3 * (block + 1)], 0.5)

    def test_inactive_block_leak_bound(self):
        rng = np.random.default_rng(11)
        alpha = 40.0
        products = [rng.uniform(0.2, 0.8, size=3) for _ in range(4)]
        layer, meta = first_layer(products, 2, alpha=alpha)
        assert layer.weights.shape == (6, 2)
        row = layer_row(layer, bin_of(2, 2))
        np.testing.assert_allclose(row[3:6], products[2], atol=1e-12)
        spread = max(abs(logit(p)).max() for p in products)
        assert np.all(row[0:3] <= sigmoid(-2 * alpha + 3 * spread))

    def test_width_mismatch(self):
        with pytest.raises(ValueError):
            first_layer([np.array([0.5]), np.array([0.5, 0.5])], 1, alpha=40.0)


class TestFixedOutputLayer:
    def test_block_repetition(self):
        layer = fixed_output_layer(2, 2, alpha=40.0)
        W, b = orthant_weights(2)
        np.testing.assert_array_equal(layer.weights, 40.0 * np.hstack([W, W]))
        np.testing.assert_array_equal(layer.bias, [-40.0, -40.0])

    def test_single_block_width(self):
        layer = fixed_output_layer(1, 2, alpha=40.0)
        assert layer.weights.shape == (2, 3)

    def test_limit_kernel_is_highest_unit_indicator(self):
        # The sharp-limit row of state z indicates the position of its
        # highest active coordinate: states 0..7 map to outcomes
        # 0,1,2,2,3,3,3,3 for n=2.
        layer = fixed_output_layer(1, 2, alpha=200.0)
        states = all_states(3)
        expected_outcome = [0, 1, 2, 2, 3, 3, 3, 3]
        for z, outcome in zip(states, expected_outcome):
            probs = sigmoid(layer.weights @ z.astype(float) + layer.bias)
            row = np.ones(1)
            for i in range(2):
                row = np.concatenate([row * (1 - probs[i]), row * probs[i]])
            assert np.argmax(row) == outcome
            assert row[outcome] == pytest.approx(1.0, abs=1e-12)

    def test_all_zero_state_maps_to_outcome_zero(self):
        layer = fixed_output_layer(1, 2, alpha=40.0)
        probs = sigmoid(layer.weights @ np.zeros(3) + layer.bias)
        assert np.all(probs < 1e-15)


class TestChainInversion:
    def test_uniform_four(self):
        np.testing.assert_allclose(invert_chain([0.25, 0.25, 0.25, 0.25]),
                                   [0.5, 2 / 3, 0.75], atol=1e-15)

    def test_dyadic(self):
        np.testing.assert_allclose(invert_chain([0.5, 0.25, 0.125, 0.125]),
                                   [2 / 3, 6 / 7, 7 / 8], atol=1e-15)

    def test_two_outcomes(self):
        q0 = 0.37
        assert invert_chain([q0, 1 - q0])[0] == pytest.approx(q0, abs=1e-15)

    @pytest.mark.parametrize("N", [1, 3, 7, 15])
    def test_forward_roundtrip(self, N):
        rng = np.random.default_rng(N)
        for _ in range(100):
            q = rng.dirichlet(np.ones(N + 1))
            q = clamp_to_interior(q, 1e-3 / (N + 1))
            back = chain_forward(invert_chain(q))
            np.testing.assert_allclose(back, q, atol=1e-12)

    def test_rejects_boundary(self):
        with pytest.raises(ValueError):
            invert_chain([0.5, 0.5, 0.0, 0.0])


class TestSplitter:
    def test_zero_parameters_split_evenly(self):
        sp = SplitterParams(0.0, np.zeros(3))
        for z in all_states(3):
            assert even_share(sp, z) == 0.5

    def test_bias_hand_value(self):
        sp = SplitterParams(-math.log(3.0), np.zeros(1))
        assert even_share(sp, [0]) == pytest.approx(0.75, abs=1e-15)

    def test_large_negative_weight_saturates(self):
        sp = SplitterParams(0.0, np.array([-50.0, 0.0]))
        assert even_share(sp, [1, 0]) == pytest.approx(1.0, abs=1e-12)

    def test_single_unit_closed_form(self):
        sp = solve_splitter([0.5], [1.0, 1.0])
        assert sp.bias == 0.0
        assert abs(sp.weights[0]) < 1e-12

    def test_bias_closed_form(self):
        sp = solve_splitter([0.5], [3.0, 1.0])
        assert sp.bias == -math.log(3.0)

    def test_solved_ratios_match(self):
        rng = np.random.default_rng(21)
        t = np.array([0.5, 2 / 3, 0.75])
        for _ in range(10):
            ratios = np.exp(rng.uniform(-5, 5, size=4))
            sp = solve_splitter(t, ratios)
            np.testing.assert_allclose(weighted_pair_ratios(sp, t), ratios, atol=1e-10)

    def test_ratio_monotone_in_weight(self):
        t = np.array([0.4, 0.6, 0.7])
        sp = solve_splitter(t, np.ones(4))
        for l in range(1, 4):
            points = np.linspace(-3, 3, 10)
            values = []
            for x in points:
                w = sp.weights.copy()
                w[l - 1] = x
                values.append(weighted_pair_ratios(SplitterParams(sp.bias, w), t)[l])
            assert np.all(np.diff(values) < 0)

    def test_later_weights_leave_earlier_classes_unchanged(self):
        t = np.array([0.4, 0.6, 0.7])
        sp = solve_splitter(t, np.array([1.0, 2.0, 0.5, 3.0]))
        bumped = SplitterParams(sp.bias, sp.weights + np.array([0.0, 0.0, 10.0]))
        before = weighted_pair_ratios(sp, t)
        after = weighted_pair_ratios(bumped, t)
        np.testing.assert_array_equal(before[:3], after[:3])
        # states with a lower highest-active unit have share exactly unchanged
        for z in ([0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]):
            assert even_share(sp, z) == even_share(bumped, z)

    def test_fixed_bias_mode(self):
        t = np.array([0.5, 0.5])
        sp = solve_splitter(t, np.array([1.0, 2.0, 3.0]), bias=0.7)
        assert sp.bias == 0.7
        got = weighted_pair_ratios(sp, t)
        np.testing.assert_allclose(got[1:], [2.0, 3.0], atol=1e-10)

    def test_rejects_bad_targets(self):
        with pytest.raises(ValueError):
            solve_splitter([0.5], [1.0, -2.0])
        with pytest.raises(ValueError):
            solve_splitter([0.5], [1.0])


class TestFixedCompile:
    def test_scalar_shape_structure(self):
        # k = n = 1: one hidden unit passing the target row mass, output
        # weight 2*alpha with bias -alpha.
        K = np.array([[0.7, 0.3], [0.2, 0.8]])
        net = compile_fixed_output(K, alpha=40.0)
        assert net.shape == (1, 1, 1)
        np.testing.assert_array_equal(net.output.weights, [[80.0]])
        np.testing.assert_array_equal(net.output.bias, [-40.0])
        assert layer_row(net.hidden, [0])[0] == pytest.approx(0.3, abs=1e-12)
        assert layer_row(net.hidden, [1])[0] == pytest.approx(0.8, abs=1e-12)
        R = full_kernel(net)
        assert max(tv_distance(K[y], R[y]) for y in range(2)) <= 1e-10

    def test_hidden_unit_count(self):
        K = sample_kernel(2, 3, seed=0, eta=1e-3)
        assert compile_fixed_output(K, alpha=40.0).m == 14

    def test_uniform_target(self):
        K = np.full((4, 4), 0.25)
        net = compile_fixed_output(K, alpha=40.0)
        R = full_kernel(net)
        assert max(tv_distance(K[y], R[y]) for y in range(4)) <= 1e-6

    def test_near_deterministic_target(self):
        # Identity-like rows compile to near-deterministic networks once
        # the clamp floor is small enough.
        K = np.eye(2)
        net = compile_fixed_output(K, alpha=40.0, eta=1e-12)
        R = full_kernel(net)
        assert tv_distance(R[0], [1.0, 0.0]) <= 1e-10
        assert tv_distance(R[1], [0.0, 1.0]) <= 1e-10

    @pytest.mark.parametrize("shape", [(1, 1), (2, 2), (3, 3)])
    def test_sharpness_convergence(self, shape):
        k, n = shape
        K = sample_kernel(k, n, seed=13, eta=1e-3)
        evaluator = "naive" if 2 ** (k - 1) * (2 ** n - 1) <= 22 else "blockwise"
        errors = []
        for alpha in (5.0, 10.0, 20.0, 40.0):
            net = compile_fixed_output(K, alpha=alpha)
            R = full_kernel(net, evaluator)
            errors.append(max(tv_distance(K[y], R[y]) for y in range(2 ** k)))
        assert all(b <= a + 1e-12 for a, b in zip(errors, errors[1:]))
        assert errors[-1] <= 1e-6

    def test_auto_alpha(self):
        K = sample_kernel(2, 2, seed=3, eta=1e-3)
        net = compile_fixed_output(K)  # alpha chosen from the logit spread
        R = full_kernel(net)
        assert max(tv_distance(K[y], R[y]) for y in range(4)) <= 1e-8

    def test_rejects_input_free(self):
        with pytest.raises(ValueError, match="compile_distribution"):
            compile_fixed_output(np.array([[0.5, 0.5]])[0:1])


class TestFreeCompile:
    def test_equal_rows_single_pair(self):
        row = np.array([0.4, 0.3, 0.2, 0.1])
        K = np.vstack([row, row])
        net, report = compile_free_output(K, alpha=40.0)
        assert net.shape == (1, 1, 2)
        assert report.max_tv <= 1e-12
        R = full_kernel(net)
        assert max(tv_distance(K[y], R[y]) for y in range(2)) <= 1e-6

    def test_hidden_unit_count(self):
        K = sample_kernel(3, 2, seed=1, eta=1e-3)
        net, _ = compile_free_output(K, alpha=40.0)
        assert net.m == 4

    def test_generic_target_residual_is_measured(self):
        K = sample_kernel(2, 2, seed=17, eta=1e-3)
        net, report = compile_free_output(K, alpha=40.0)
        assert isinstance(report, ResidualReport)
        assert report.per_input_tv.shape == (4,)
        # the fitted even input of block 0 is idealized-exact
        assert report.per_input_tv[0] <= 1e-12
        # realized kernel matches the idealization up to leakage
        R = full_kernel(net)
        for y in range(4):
            assert tv_distance(R[y], report.idealized[y]) <= 1e-9

    def test_requires_two_outputs(self):
        with pytest.raises(ValueError):
            compile_free_output(np.array([[0.5, 0.5], [0.5, 0.5]]), alpha=40.0)


class TestDistributionCompile:
    def test_uniform_chain_values(self):
        net = compile_distribution(np.full(4, 0.25), "fixed", alpha=40.0)
        stay_zero = 1.0 - sigmoid(net.hidden.bias)
        np.testing.assert_allclose(stay_zero, [0.5, 2 / 3, 0.75], atol=1e-12)

    def test_trainable_width(self):
        net = compile_distribution(np.full(4, 0.25), "trainable", alpha=40.0)
        assert net.m == 1

    def test_fixed_width(self):
        net = compile_distribution(np.full(8, 0.125), "fixed", alpha=40.0)
        assert net.m == 7

    @pytest.mark.parametrize("variant", ["fixed", "trainable"])
    def test_random_targets(self, variant):
        for seed in range(5):
            q = sample_kernel(0, 3, seed=seed, eta=1e-3)[0]
            net = compile_distribution(q, variant, alpha=40.0)
            assert tv_distance(full_kernel(net)[0], q) <= 1e-6

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            compile_distribution(np.full(4, 0.25), "other")


class TestBounds:
    @pytest.mark.parametrize("shape", [(1, 2), (2, 2), (3, 2), (1, 3)])
    def test_free_tight_cases(self, shape):
        b = hidden_unit_bounds(*shape)
        assert b.lower_free == b.upper_free

    def test_fixed_tight_at_single_input(self):
        for n in range(1, 5):
            b = hidden_unit_bounds(1, n)
            assert b.lower_fixed == b.upper_fixed == 2 ** n - 1

    def test_hand_values(self):
        b = hidden_unit_bounds(3, 2)
        assert b.lower_free == 4 and b.upper_free == 4
        b = hidden_unit_bounds(2, 3)
        assert b.lower_free == 5 and b.upper_free == 6
        assert hidden_unit_bounds(1, 1).upper_free is None

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            hidden_unit_bounds(0, 2)
