import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from mohone.diffusion import (
    HeatKernelConfig, estimate_lambda_max, heat_column_chebyshev,
    heat_matrix, heat_matrix_chebyshev, heat_matrix_exact, heat_signature,
    all_heat_signatures, load_psi, load_signatures, save_psi, save_signatures,
)
from mohone.graph import UndirectedGraph, normalized_laplacian

from conftest import barbell_graph, complete_graph, cycle_graph, erdos_renyi


def lap(g):
    return normalized_laplacian(g)


class TestExact:
    def test_s_zero_is_identity(self):
        m = heat_matrix_exact(lap(erdos_renyi(30, 0.2, 3)), 0.0)
        assert np.max(np.abs(m.psi - np.eye(30))) <= 1e-12

    def test_k3_closed_form(self):
        # analytically: J/3 + exp(-3s/2) (I - J/3) at s = 1
        m = heat_matrix_exact(lap(complete_graph(3)), 1.0)
        assert m.raw[0, 0] == pytest.approx(0.48209, abs=1e-5)
        assert m.raw[0, 1] == pytest.approx(0.25896, abs=1e-5)
        closed = np.full((3, 3), 1 / 3) + np.exp(-1.5) * (np.eye(3) - np.full((3, 3), 1 / 3))
        np.testing.assert_allclose(m.raw, closed, atol=1e-12)

    def test_matches_expm_oracle(self):
        g = erdos_renyi(40, 0.15, 11)
        dense = lap(g).matrix.toarray()
        for s in (0.5, 2.0, 5.0):
            m = heat_matrix_exact(lap(g), s)
            oracle = scipy.linalg.expm(-s * dense)
            assert np.max(np.abs(m.raw - oracle)) <= 1e-10

    def test_large_scale_limit_k3(self):
        m = heat_matrix_exact(lap(complete_graph(3)), 50.0)
        assert np.max(np.abs(m.psi - 1 / 3)) <= 1e-6

    def test_node_cap_enforced(self):
        with pytest.raises(ValueError, match="cap"):
            heat_matrix_exact(lap(complete_graph(4)), 1.0, max_nodes=3)

    def test_raw_symmetric_flag(self):
        m = heat_matrix_exact(lap(erdos_renyi(25, 0.3, 5)), 2.0)
        assert m.raw_symmetric is True
        assert np.max(np.abs(m.raw - m.raw.T)) <= 1e-9

    @given(st.integers(min_value=3, max_value=40), st.integers(min_value=0, max_value=2 ** 31))
    @settings(max_examples=25, deadline=None)
    def test_column_stochastic(self, n, seed):
        m = heat_matrix_exact(lap(erdos_renyi(n, 0.25, seed)), 5.0)
        assert np.all(m.psi >= 0)
        np.testing.assert_allclose(m.psi.sum(axis=0), 1.0, atol=1e-9)

    @given(st.integers(min_value=3, max_value=40), st.integers(min_value=0, max_value=2 ** 31))
    @settings(max_examples=20, deadline=None)
    def test_small_scale_linearization(self, n, seed):
        s = 1e-3
        L = lap(erdos_renyi(n, 0.3, seed))
        m = heat_matrix_exact(L, s)
        linear = np.eye(L.n) - s * L.matrix.toarray()
        assert np.max(np.abs(m.raw - linear)) <= 10 * s * s

    def test_regular_graph_raw_columns_sum_to_one(self):
        m = heat_matrix_exact(lap(cycle_graph(12)), 3.0)
        np.testing.assert_allclose(m.raw.sum(axis=0), 1.0, atol=1e-9)


class TestLambdaMax:
    def test_k3(self):
        lam = estimate_lambda_max(lap(complete_graph(3)))
        assert 1.5 <= lam <= 1.515

    def test_bipartite_cycle_exactly_two(self):
        assert estimate_lambda_max(lap(cycle_graph(4))) == 2.0

    def test_single_self_loop_node(self):
        g = UndirectedGraph.from_edges(1, [])
        lam = estimate_lambda_max(lap(g))
        assert 0.0 <= lam <= 2.0

    @given(st.integers(min_value=2, max_value=50), st.integers(min_value=0, max_value=2 ** 31))
    @settings(max_examples=25, deadline=None)
    def test_upper_bounds_true_lambda(self, n, seed):
        L = lap(erdos_renyi(n, 0.25, seed))
        true_max = np.linalg.eigvalsh(L.matrix.toarray())[-1]
        lam = estimate_lambda_max(L)
        assert lam >= true_max - 1e-9
        assert lam <= 2.0


class TestChebyshev:
    def test_s_zero_identity(self):
        for k in (1, 5, 30):
            m = heat_matrix_chebyshev(lap(erdos_renyi(20, 0.3, 2)), 0.0, K=k)
            assert np.max(np.abs(m.psi - np.eye(20))) <= 1e-8

    def test_k3_matches_exact(self):
        L = lap(complete_graph(3))
        exact = heat_matrix_exact(L, 1.0)
        cheb = heat_matrix_chebyshev(L, 1.0, K=30)
        assert np.max(np.abs(cheb.psi - exact.psi)) <= 1e-6

    def test_er100_matches_exact(self):
        L = lap(erdos_renyi(100, 0.08, 17))
        exact = heat_matrix_exact(L, 5.0)
        cheb = heat_matrix_chebyshev(L, 5.0, K=30)
        assert np.max(np.abs(cheb.psi - exact.psi)) <= 1e-3

    def test_error_nonincreasing_in_degree(self):
        L = lap(erdos_renyi(60, 0.12, 23))
        exact = heat_matrix_exact(L, 5.0)
        errors = []
        for k in (5, 10, 20, 30):
            cheb = heat_matrix_chebyshev(L, 5.0, K=k)
            errors.append(np.max(np.abs(cheb.psi - exact.psi)))
        for a, b in zip(errors, errors[1:]):
            assert b <= a + 1e-12

    def test_column_on_demand_matches_full(self):
        L = lap(erdos_renyi(30, 0.2, 9))
        lam = estimate_lambda_max(L)
        full = heat_matrix_chebyshev(L, 2.0, K=20, lam_max=lam)
        for node in (0, 7, 29):
            col = heat_column_chebyshev(L, 2.0, node, K=20, lam_max=lam)
            np.testing.assert_allclose(col, full.psi[:, node], atol=1e-12)

    def test_dispatch_by_config(self):
        L = lap(complete_graph(4))
        exact = heat_matrix(L, HeatKernelConfig(scale=1.0, method="exact"))
        cheb = heat_matrix(L, HeatKernelConfig(scale=1.0, method="chebyshev"))
        assert np.max(np.abs(exact.psi - cheb.psi)) <= 1e-6

    def test_all_self_loop_graph_degenerate_spectrum(self):
        # every node isolated: L = 0, lambda-max estimate 0, heat matrix = I
        g = UndirectedGraph.from_edges(4, [(i, i) for i in range(4)])
        L = lap(g)
        assert estimate_lambda_max(L) == 0.0
        for s in (0.0, 3.0):
            cheb = heat_matrix_chebyshev(L, s, K=10)
            assert np.max(np.abs(cheb.psi - np.eye(4))) <= 1e-9
            exact = heat_matrix_exact(L, s)
            assert np.max(np.abs(exact.psi - np.eye(4))) <= 1e-9


class TestHeatSignature:
    def test_identity_psi_masses(self):
        m = heat_matrix_exact(lap(erdos_renyi(20, 0.3, 4)), 0.0)
        sig = heat_signature(m, 5, bins=10)
        assert sig.histogram[0] == pytest.approx(19 / 20)
        assert sig.histogram[-1] == pytest.approx(1 / 20)
        assert sig.histogram.sum() == pytest.approx(1.0, abs=1e-9)

    def test_k3_nodes_identical(self):
        m = heat_matrix_exact(lap(complete_graph(3)), 1.0)
        sigs = all_heat_signatures(m, bins=25)
        for sig in sigs[1:]:
            np.testing.assert_array_equal(sig.histogram, sigs[0].histogram)

    def test_barbell_symmetric_positions_identical(self):
        g, labels = barbell_graph(6, 2)
        m = heat_matrix_exact(lap(g), 5.0)
        sigs = all_heat_signatures(m, bins=50)
        by_label = {}
        for node, lab in enumerate(labels):
            by_label.setdefault(lab, []).append(sigs[node].histogram)
        for hists in by_label.values():
            for h in hists[1:]:
                np.testing.assert_array_equal(h, hists[0])

    def test_bins_validation(self):
        m = heat_matrix_exact(lap(complete_graph(3)), 1.0)
        with pytest.raises(ValueError):
            heat_signature(m, 0, bins=1)


class TestPersistence:
    def test_psi_round_trip(self, tmp_path):
        m = heat_matrix_exact(lap(erdos_renyi(15, 0.3, 8)), 2.5)
        path = tmp_path / "psi.bin"
        save_psi(path, m)
        loaded = load_psi(path)
        assert loaded.scale == 2.5
        np.testing.assert_array_equal(loaded.psi, m.psi)

    def test_magic_check(self, tmp_path):
        p = tmp_path / "bad.bin"
        p.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(ValueError, match="magic"):
            load_psi(p)

    def test_signatures_round_trip(self, tmp_path):
        m = heat_matrix_exact(lap(complete_graph(5)), 1.0)
        sigs = all_heat_signatures(m, bins=10)
        path = tmp_path / "sigs.json"
        save_signatures(path, sigs)
        loaded = load_signatures(path)
        assert len(loaded) == 5
        for a, b in zip(loaded, sigs):
            assert a.node == b.node
            np.testing.assert_array_equal(a.histogram, b.histogram)
