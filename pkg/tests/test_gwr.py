"""Unit and property tests for the growing-network core."""

import numpy as np
import pytest

from gwr_reach.gwr import GwrNetwork, GwrParams, habituation_fixed_point, new_network

P = GwrParams(epochs=40, max_age=5, max_neurons=50, eps_b=0.5, eps_n=0.01,
              tau_b=0.3, tau_n=0.1, a_t=0.5, h_t=0.7)


def random_net(rng, n=50, d=3):
    ids = range(n)
    weights = rng.normal(size=(n, d)) * 5.0
    return GwrNetwork.from_state(d, P, 0, ids, weights, np.ones(n))


# ----------------------------------------------------------------------
# construction
# ----------------------------------------------------------------------

def test_new_network_two_neurons_no_edges():
    net = new_network(2, P, 0, [np.zeros(2), np.ones(2)])
    assert net.n_neurons == 2
    assert net.n_edges == 0
    assert net.habituation(0) == 1.0 and net.habituation(1) == 1.0
    assert np.array_equal(net.weight(0), [0.0, 0.0])
    assert np.array_equal(net.weight(1), [1.0, 1.0])


def test_new_network_rejects_identical_samples():
    with pytest.raises(ValueError):
        new_network(2, P, 0, [np.zeros(2), np.zeros(2)])


def test_new_network_rejects_dimension_mismatch():
    with pytest.raises(ValueError):
        new_network(3, P, 0, [np.zeros(2), np.ones(2)])


def test_params_validation():
    with pytest.raises(ValueError):
        GwrParams(eps_b=0.01, eps_n=0.5)
    with pytest.raises(ValueError):
        GwrParams(tau_b=0.1, tau_n=0.3)
    with pytest.raises(ValueError):
        GwrParams(a_t=0.95)
    with pytest.raises(ValueError):
        GwrParams(h_t=0.0)


# ----------------------------------------------------------------------
# BMU search
# ----------------------------------------------------------------------

def test_find_bmus_by_inspection():
    net = new_network(2, P, 0, [np.zeros(2), np.full(2, 10.0)])
    assert net.find_bmus(np.array([1.0, 1.0])) == (0, 1)


def test_find_bmus_exact_match():
    rng = np.random.default_rng(7)
    net = random_net(rng, n=20, d=4)
    k = 13
    b, _ = net.find_bmus(net.weight(k))
    assert b == k


def test_find_bmus_needs_two_neurons():
    net = GwrNetwork.from_state(2, P, 0, [0], [[1.0, 2.0]], [1.0])
    with pytest.raises(ValueError):
        net.find_bmus(np.zeros(2))


def test_find_bmus_matches_linear_scan_oracle():
    rng = np.random.default_rng(123)
    net = random_net(rng, n=50, d=3)
    for _ in range(100):
        x = rng.normal(size=3) * 5.0
        dists = [np.linalg.norm(x - net.weight(i)) for i in net.live_ids()]
        b_ref = int(np.argmin(dists))
        rest = list(dists)
        rest[b_ref] = np.inf
        s_ref = int(np.argmin(rest))
        assert net.find_bmus(x) == (b_ref, s_ref)


def test_query_nearest_singleton_and_activity():
    net = GwrNetwork.from_state(2, P, 0, [0], [[1.0, 2.0]], [1.0])
    b, act = net.query_nearest(np.array([1.0, 2.0]))
    assert b == 0 and act == 1.0
    with pytest.raises(ValueError):
        GwrNetwork.from_state(2, P, 0, [], np.zeros((0, 2)), []).query_nearest(np.zeros(2))


# ----------------------------------------------------------------------
# activity
# ----------------------------------------------------------------------

def test_activity_values():
    net = new_network(2, P, 0, [np.zeros(2), np.full(2, 10.0)])
    assert net.activity(0, np.zeros(2)) == 1.0
    assert net.activity(0, np.array([1.0, 0.0])) == pytest.approx(np.exp(-1.0), rel=1e-12)
    assert net.activity(0, np.array([np.log(2.0), 0.0])) == pytest.approx(0.5, rel=1e-12)


# ----------------------------------------------------------------------
# habituation
# ----------------------------------------------------------------------

def test_habituate_bmu_and_neighbor_rates():
    net = new_network(1, P, 0, [np.zeros(1), np.ones(1)])
    # wire an edge so neuron 1 is a neighbor of 0
    net._adj[0][1] = 0
    net._adj[1][0] = 0
    net.habituate(0)
    assert net.habituation(0) == pytest.approx(0.7, rel=1e-12)
    assert net.habituation(1) == pytest.approx(0.9, rel=1e-12)


def test_habituation_fixed_point_and_convergence():
    h_star = habituation_fixed_point()
    assert h_star == pytest.approx(1.0 - 1.0 / 1.05, rel=1e-15)
    net = new_network(1, P, 0, [np.zeros(1), np.ones(1)])  # no edges: b alone decays
    prev = net.habituation(0)
    for step in range(200):
        net.habituate(0)
        h = net.habituation(0)
        assert 0.0 <= h <= 1.0
        if prev > h_star:
            assert h < prev
        prev = h
        if abs(h - h_star) < 1e-9:
            break
    assert abs(net.habituation(0) - h_star) < 1e-9
    net.habituate(0)  # fixed point maps to itself
    assert abs(net.habituation(0) - h_star) < 1e-9


# ----------------------------------------------------------------------
# train_step
# ----------------------------------------------------------------------

def test_step_zero_error_input_changes_nothing():
    net = new_network(2, P, 0, [np.zeros(2), np.ones(2)])
    report = net.train_step(np.zeros(2))
    assert report.bmu == 0 and not report.inserted
    assert np.array_equal(net.weight(0), [0.0, 0.0])  # delta = eps*h*0
    assert net.habituation(0) == pytest.approx(0.7, rel=1e-12)


def test_step_habituation_gate_blocks_insertion():
    net = new_network(2, P, 0, [np.zeros(2), np.array([1.0, 0.0])])
    report = net.train_step(np.array([10.0, 0.0]))  # a_b << a_t but h_b = 1 > h_t
    assert not report.inserted
    assert net.n_neurons == 2


def test_step_trace_drives_insertion_at_midpoint():
    # hand-evaluated scalar trace: repeated x=(10,0) on seeds (0,0), (1,0)
    net = new_network(2, P, 0, [np.zeros(2), np.array([1.0, 0.0])])
    r1 = net.train_step(np.array([10.0, 0.0]))
    assert (r1.bmu, r1.second, r1.inserted) == (1, 0, False)
    assert net.weight(1)[0] == pytest.approx(5.5, rel=1e-12)
    assert net.weight(0)[0] == pytest.approx(0.1, rel=1e-12)
    assert net.habituation(1) == pytest.approx(0.7, rel=1e-12)
    assert net.habituation(0) == pytest.approx(0.9, rel=1e-12)

    r2 = net.train_step(np.array([10.0, 0.0]))
    assert not r2.inserted  # h_b = 1 - 0.3 sits just above the 0.7 threshold
    assert net.weight(1)[0] == pytest.approx(7.075, rel=1e-12)
    assert net.weight(0)[0] == pytest.approx(0.1891, rel=1e-12)
    assert net.habituation(1) == pytest.approx(0.4945, rel=1e-12)
    assert net.habituation(0) == pytest.approx(0.8105, rel=1e-12)

    r3 = net.train_step(np.array([10.0, 0.0]))
    assert r3.inserted and r3.new_id == 2
    assert net.weight(2)[0] == pytest.approx((7.075 + 10.0) / 2.0, rel=1e-12)
    assert net.habituation(2) == 1.0
    assert net.weight(1)[0] == pytest.approx(7.075, rel=1e-12)  # insertion skips adaptation
    assert net.habituation(1) == pytest.approx(0.4945, rel=1e-12)
    assert dict((tuple(e[:2]), e[2]) for e in net.edge_list()) == {(0, 2): 0, (1, 2): 1}


def test_growth_gate_iff_over_random_stream():
    rng = np.random.default_rng(42)
    net = new_network(2, GwrParams(max_neurons=30), 0, [np.zeros(2), np.ones(2)])
    inserted_seen = 0
    for _ in range(400):
        x = rng.normal(size=2) * 3.0
        b, _ = net.find_bmus(x)
        gate = (net.activity(b, x) < net.params.a_t
                and net.habituation(b) < net.params.h_t
                and net.n_neurons < net.params.max_neurons)
        report = net.train_step(x)
        assert report.inserted == gate
        inserted_seen += report.inserted
        assert net.n_neurons <= net.params.max_neurons
        assert all(age <= net.params.max_age for _, _, age in net.edge_list())
        assert all(0.0 <= net.habituation(i) <= 1.0 for i in net.live_ids())
        if net.n_neurons > 2:
            assert all(len(net.neighbors(i)) > 0 for i in net.live_ids())
    assert inserted_seen > 0


# ----------------------------------------------------------------------
# weight adaptation contraction
# ----------------------------------------------------------------------

def test_adaptation_contracts_bmu_distance():
    rng = np.random.default_rng(5)
    net = new_network(2, GwrParams(max_neurons=2), 0, [np.zeros(2), np.ones(2)])
    for _ in range(50):
        x = rng.normal(size=2)
        b, _ = net.find_bmus(x)
        before = np.linalg.norm(x - net.weight(b))
        coeff = net.params.eps_b * net.habituation(b)
        net.train_step(x)
        after = np.linalg.norm(x - net.weight(b))
        if before > 0 and 0.0 < coeff < 1.0:
            assert after < before


# ----------------------------------------------------------------------
# train
# ----------------------------------------------------------------------

def test_train_single_point_fixed_point():
    net = new_network(2, P, 3, [np.zeros(2), np.ones(2)])
    point = np.array([0.3, -0.2])
    net.train(np.tile(point, (20, 1)))
    b, _ = net.find_bmus(point)
    assert np.linalg.norm(net.weight(b) - point) < 1e-6


def test_train_neuron_cap_holds():
    rng = np.random.default_rng(0)
    net = new_network(2, GwrParams(max_neurons=2, epochs=10), 0, [np.zeros(2), np.ones(2)])
    net.train(rng.normal(size=(60, 2)) * 4.0)
    assert net.n_neurons == 2


def _kmeans_oracle(data, k, iters=50, seed=0):
    # plain Lloyd iterations, seeded; independent of the network code path
    rng = np.random.default_rng(seed)
    centers = data[rng.choice(len(data), size=k, replace=False)].copy()
    for _ in range(iters):
        d2 = ((data[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        for j in range(k):
            sel = data[labels == j]
            if len(sel):
                centers[j] = sel.mean(axis=0)
    d2 = ((data[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return float(np.sqrt(d2.min(axis=1)).mean())


def two_cluster_data(n=200, sigma=0.05, seed=11):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n // 2, 2)) * sigma
    b = rng.normal(size=(n // 2, 2)) * sigma + np.array([10.0, 0.0])
    return np.concatenate([a, b])


def test_train_two_clusters_converges():
    data = two_cluster_data()
    net = new_network(2, P, 9, [data[0], data[1]])
    trace = net.train(data)
    qe = net.quantization_error(data)
    assert qe < 3 * 0.05
    assert trace[-1] <= trace[0]
    assert np.all(np.isfinite(trace))
    kmeans_qe = _kmeans_oracle(data, k=net.n_neurons)
    assert qe <= max(3.0 * kmeans_qe, 0.05)


def test_train_rejects_bad_datasets():
    net = new_network(2, P, 0, [np.zeros(2), np.ones(2)])
    with pytest.raises(ValueError):
        net.train(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        net.train(np.zeros((4, 3)))


def test_training_is_deterministic():
    data = two_cluster_data(seed=21)

    def build():
        net = new_network(2, P, 77, [data[0], data[1]])
        net.train(data)
        return net

    n1, n2 = build(), build()
    ids1, ids2 = n1.live_ids(), n2.live_ids()
    assert np.array_equal(ids1, ids2)
    assert np.array_equal(n1._weights[ids1], n2._weights[ids2])
    assert np.array_equal(n1._habit[ids1], n2._habit[ids2])
    assert n1.edge_list() == n2.edge_list()
    assert n1.next_id == n2.next_id


# ----------------------------------------------------------------------
# serialization
# ----------------------------------------------------------------------

def test_save_load_round_trip_bit_exact(tmp_path):
    data = two_cluster_data(seed=31)
    net = new_network(2, P, 5, [data[0], data[1]])
    net.train(data[:80])
    p1 = tmp_path / "net.gwr"
    p2 = tmp_path / "net2.gwr"
    net.save(p1)
    clone = GwrNetwork.load(p1)
    clone.save(p2)
    assert p1.read_bytes() == p2.read_bytes()
    ids = net.live_ids()
    assert np.array_equal(ids, clone.live_ids())
    assert np.array_equal(net._weights[ids], clone._weights[ids])
    assert np.array_equal(net._habit[ids], clone._habit[ids])
    assert net.edge_list() == clone.edge_list()
    assert net.next_id == clone.next_id and net.rng_seed == clone.rng_seed
    assert net.params == clone.params
