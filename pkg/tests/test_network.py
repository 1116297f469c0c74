import numpy as np
import pytest

from netsprt.network import (
    CombinationMatrix,
    GraphConnectivityError,
    SensorGraph,
    equal_weight_matrix,
    generate_geometric_graph,
    graph_from_json,
    graph_to_json,
    xi_bound,
)


def path3() -> SensorGraph:
    return SensorGraph(3, frozenset({(0, 1), (1, 2)}))


def complete(n: int) -> SensorGraph:
    return SensorGraph(n, frozenset((a, b) for a in range(n) for b in range(a + 1, n)))


class TestSensorGraph:
    def test_rejects_self_loop(self):
        with pytest.raises(ValueError, match="self-loop"):
            SensorGraph(2, frozenset({(0, 0)}))

    def test_rejects_disconnected(self):
        with pytest.raises(ValueError, match="connected"):
            SensorGraph(4, frozenset({(0, 1), (2, 3)}))

    def test_closed_neighborhoods_sorted_with_self(self):
        indptr, indices = path3().closed_neighborhoods()
        assert indptr.tolist() == [0, 2, 5, 7]
        assert indices.tolist() == [0, 1, 0, 1, 2, 1, 2]


class TestGeometricGraph:
    def test_fixed_positions_give_path(self):
        # distances 0.5 and 1.0; radius 0.6 links only adjacent pairs
        pos = np.array([[0.0, 0.0], [0.0, 0.5], [0.0, 1.0]])
        diff = pos[:, None] - pos[None, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        edges = {(a, b) for a in range(3) for b in range(a + 1, 3) if dist[a, b] <= 0.6}
        assert edges == {(0, 1), (1, 2)}

    def test_paper_scale_network(self):
        rng = np.random.default_rng(0)
        g = generate_geometric_graph(20, 0.6, rng)
        assert g.n == 20
        degrees = [len(g.neighbors(k)) for k in range(20)]
        assert min(degrees) >= 1
        assert g.positions.shape == (20, 2)
        assert ((g.positions >= 0) & (g.positions <= 1)).all()

    def test_two_nodes_max_radius_complete(self):
        rng = np.random.default_rng(1)
        g = generate_geometric_graph(2, np.sqrt(2.0), rng)
        assert g.edges == frozenset({(0, 1)})

    def test_resample_budget_error(self):
        rng = np.random.default_rng(2)
        with pytest.raises(GraphConnectivityError):
            generate_geometric_graph(20, 0.01, rng, max_attempts=5)

    def test_seed_reproducibility(self):
        g1 = generate_geometric_graph(15, 0.5, np.random.default_rng(42))
        g2 = generate_geometric_graph(15, 0.5, np.random.default_rng(42))
        assert g1.edges == g2.edges
        assert np.array_equal(g1.positions, g2.positions)

    def test_radius_validation(self):
        with pytest.raises(ValueError):
            generate_geometric_graph(5, 0.0, np.random.default_rng(0))
        with pytest.raises(ValueError):
            generate_geometric_graph(5, 2.0, np.random.default_rng(0))


class TestEqualWeights:
    def test_path_rows(self):
        w = equal_weight_matrix(path3()).w
        assert np.allclose(w[0], [1 / 2, 1 / 2, 0])
        assert np.allclose(w[1], [1 / 3, 1 / 3, 1 / 3])
        assert np.allclose(w[2], [0, 1 / 2, 1 / 2])

    def test_complete_graph_uniform(self):
        w = equal_weight_matrix(complete(4)).w
        assert np.allclose(w, 0.25)

    def test_star_rows(self):
        star = SensorGraph(4, frozenset({(0, 1), (0, 2), (0, 3)}))
        w = equal_weight_matrix(star).w
        assert np.allclose(w[0], 0.25)
        for leaf in (1, 2, 3):
            assert w[leaf, leaf] == pytest.approx(0.5)
            assert w[leaf, 0] == pytest.approx(0.5)
            assert w[leaf].sum() == pytest.approx(1.0)

    def test_row_sums_and_support(self):
        rng = np.random.default_rng(3)
        for seed in range(5):
            g = generate_geometric_graph(12, 0.5, np.random.default_rng(seed))
            cm = equal_weight_matrix(g)
            assert np.max(np.abs(cm.w.sum(axis=1) - 1.0)) <= 1e-12
            assert (cm.w >= 0).all()
            cm.check_support(g)
            assert np.max(np.abs(cm.w @ np.ones(g.n) - 1.0)) <= 1e-12

    def test_matrix_validation(self):
        with pytest.raises(ValueError, match="sum to one"):
            CombinationMatrix(np.array([[0.5, 0.4], [0.5, 0.5]]))
        with pytest.raises(ValueError, match="non-negative"):
            CombinationMatrix(np.array([[1.5, -0.5], [0.5, 0.5]]))


class TestXiBound:
    def test_path_max_norm(self):
        # direct product oracle: WW^T diagonal max = 1/4 + 1/4
        w = equal_weight_matrix(path3())
        prod = w.w @ w.w.T
        assert prod.max() == pytest.approx(0.5)
        assert xi_bound(w, "max_norm", 1).value == pytest.approx(0.5)

    def test_complete_graph_rank_one(self):
        w = equal_weight_matrix(complete(4))
        assert xi_bound(w, "max_norm", 1).value == pytest.approx(0.25)

    def test_eigen_vs_max_norm_bound(self):
        # dense eigensolve oracle on the path graph
        w = equal_weight_matrix(path3())
        prod = w.w @ w.w.T
        lam_max = np.linalg.eigvalsh(prod)[-1]
        xe = xi_bound(w, "eigen", 1)
        assert xe.value == pytest.approx(lam_max / 3)
        xm = xi_bound(w, "max_norm", 1)
        assert xe.value <= xm.value * 3 + 1e-12

    def test_doubly_stochastic_eigen_bound(self):
        # complete-graph weights are doubly stochastic: lam_max = 1
        w = equal_weight_matrix(complete(6))
        assert xi_bound(w, "eigen", 1).value == pytest.approx(1.0 / 6.0)

    def test_positive_for_random_graphs(self):
        for seed in range(4):
            g = generate_geometric_graph(10, 0.6, np.random.default_rng(seed))
            w = equal_weight_matrix(g)
            for method in ("max_norm", "eigen"):
                for m in (1, 2, 3):
                    xi = xi_bound(w, method, m)
                    assert 0.0 < xi.value <= 1.0

    def test_validation(self):
        w = equal_weight_matrix(path3())
        with pytest.raises(ValueError):
            xi_bound(w, "max_norm", 0)
        with pytest.raises(ValueError):
            xi_bound(w, "nope", 1)


class TestJson:
    def test_round_trip(self):
        g = generate_geometric_graph(8, 0.7, np.random.default_rng(5))
        w = equal_weight_matrix(g)
        g2, w2 = graph_from_json(graph_to_json(g, w))
        assert g2.edges == g.edges
        assert np.allclose(g2.positions, g.positions)
        assert np.allclose(w2.w, w.w)

    def test_round_trip_without_weights(self):
        g = path3()
        g2, w2 = graph_from_json(graph_to_json(g))
        assert g2.edges == g.edges
        assert w2 is None
