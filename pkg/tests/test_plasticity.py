import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neurogrow.analysis._geom import components
from neurogrow.dynamics import NoiseParams
from neurogrow.errors import FormatError
from neurogrow.plasticity import (ProcessingUnits, WinnerResult, forward_wta, hebbian_update,
                                  init_units, load_weights, save_weights, self_organize,
                                  update_thresholds)
from neurogrow.topology import build_grid_layer, build_synaptic_matrix


def units_from(w, c=None, eta=0.1):
    w = np.asarray(w, dtype=float)
    M = w.shape[1]
    return ProcessingUnits(w, np.zeros(M) if c is None else np.asarray(c, float),
                           np.zeros(M, dtype=int), np.zeros(M), w.mean(0), eta)


def test_init_single_weight():
    u = init_units(1, 1, seed=0)
    assert 0 < u.w[0, 0] < 1
    assert u.mean0[0] == u.w[0, 0]
    assert u.c[0] == 0 and u.z[0] == 0


def test_init_seeded():
    assert np.array_equal(init_units(5, 20, 3).w, init_units(5, 20, 3).w)
    assert not np.array_equal(init_units(5, 20, 3).w, init_units(5, 20, 4).w)


def test_init_full_connectivity():
    u = init_units(400, 900, seed=1)
    assert u.w.shape == (900, 400)
    assert (u.w > 0).all()


def test_spatially_biased_init_needs_geometry():
    with pytest.raises(ValueError):
        init_units(4, 100, init_scheme="spatially-biased")
    g = build_grid_layer(10, 10)
    u = init_units(4, 100, init_scheme="spatially-biased", geom=g)
    assert (u.w > 0).all()
    with pytest.raises(ValueError):
        init_units(4, 100, init_scheme="nope")


def test_wta_no_spikes():
    r = forward_wta(init_units(3, 4), np.zeros(4, bool))
    assert r.winner is None and r.activation == 0


def test_wta_direct_argmax():
    # one firing node with weights (0.9, 0.5) gives r = (0.9, 0.5)
    u = units_from([[0.9, 0.5], [0.1, 0.1]])
    r = forward_wta(u, np.array([True, False]))
    assert r.winner == 0 and r.activation == pytest.approx(0.9)


def test_wta_threshold_gates():
    u = units_from([[0.9, 0.5], [0.1, 0.1]], c=[1.0, 1.0])
    r = forward_wta(u, np.array([True, False]))
    assert r.winner is None and r.activation == 0
    r = forward_wta(u, np.array([True, False]), selection="raw")
    assert r.winner is None


def test_wta_tie_lowest_index():
    u = units_from([[0.5, 0.5, 0.5]])
    assert forward_wta(u, np.array([True])).winner == 0


def test_hebbian_no_winner_bit_identical():
    u = init_units(3, 5, 0)
    before = u.copy()
    hebbian_update(u, WinnerResult(), np.ones(5, bool))
    assert np.array_equal(u.w, before.w) and np.array_equal(u.z, before.z)


def test_hebbian_worked_example():
    u = units_from([[1.0], [1.0]], eta=0.1)
    hebbian_update(u, WinnerResult(0, 2.0), np.array([True, False]))
    assert u.w[:, 0] == pytest.approx([1.2 * 2 / 2.2, 1.0 * 2 / 2.2])
    assert u.w[:, 0] == pytest.approx([1.0909, 0.9091], abs=1e-4)
    assert u.z[0] == 1 and u.y_max[0] == 2.0


def test_repeated_patch_sharpens():
    u = units_from(np.ones((5, 1)), eta=0.1)
    spikes = np.array([True, True, False, False, False])
    prev = u.w[0, 0] / u.w[4, 0]
    for _ in range(10):
        r = forward_wta(u, spikes)
        hebbian_update(u, r, spikes)
        ratio = u.w[0, 0] / u.w[4, 0]
        assert ratio > prev
        prev = ratio


def test_thresholds_gate_on_window():
    u = units_from(np.ones((2, 1)))
    u.z[0], u.y_max[0] = 10, 5.0
    update_thresholds(u, 999)
    assert u.c[0] == 0 and u.z[0] == 10
    update_thresholds(u, 1000)
    assert u.c[0] == 1.0 and u.z[0] == 0


def test_thresholds_busy_unit_kept():
    u = units_from(np.ones((2, 1)), c=[0.3])
    u.z[0], u.y_max[0] = 250, 5.0
    update_thresholds(u, 1000)
    assert u.c[0] == 0.3 and u.z[0] == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 6), st.integers(1, 30),
       st.floats(0.001, 1.0))
def test_update_invariants(seed, M, N, eta):
    rng = np.random.default_rng(seed)
    u = init_units(M, N, seed, eta_learn=eta)
    u.c[:] = rng.uniform(0, 2, M)
    for t in range(1, 60):
        spikes = rng.random(N) < 0.3
        before = u.copy()
        r = forward_wta(u, spikes)
        r_all = u.w[spikes].sum(0) - u.c if spikes.any() else np.zeros(M)
        assert sum(1 for j in range(M) if (j == r.winner and r.activation > 0)) <= 1
        assert (r.activation > 0) == (r.winner is not None)
        if r.winner is not None:
            assert r.activation == pytest.approx(r_all.max())
        hebbian_update(u, r, spikes)
        assert (u.w >= 0).all()
        np.testing.assert_allclose(u.w.mean(0), u.mean0, rtol=1e-9)
        if not spikes.any():
            assert np.array_equal(u.w, before.w)
        update_thresholds(u, t, window=10)
        assert (u.z >= 0).all() and (u.z <= 10).all()


def test_locality_emerges_from_scripted_wave():
    g = build_grid_layer(10, 10)
    adj = g.neighbor_graph(2.0)
    u = init_units(4, 100, seed=2, eta_learn=0.05)
    wins = np.zeros(4, dtype=int)
    t = 0
    for _ in range(500):
        for k in range(8):
            spikes = (g.positions[:, 0] >= k) & (g.positions[:, 0] < k + 3)
            t += 1
            r = forward_wta(u, spikes)
            hebbian_update(u, r, spikes)
            update_thresholds(u, t, window=100, z_min=20)
            if r.winner is not None:
                wins[r.winner] += 1
    learned = np.flatnonzero(wins > 0)
    assert len(learned) >= 3
    for j in learned:
        col = u.w[:, j]
        top = np.flatnonzero(col >= np.quantile(col, 0.75))
        assert len(components(adj, top)) == 1


def test_self_organize_quiescent_is_noop():
    g = build_grid_layer(8, 8)
    S = build_synaptic_matrix(g)
    u = init_units(4, 64, 0)
    before = u.copy()
    self_organize(g, S, None, NoiseParams(0.0), u, 500, seed=0)
    assert np.array_equal(u.w, before.w) and np.array_equal(u.c, before.c)


def test_self_organize_deterministic_and_continuable():
    g = build_grid_layer(10, 10)
    S = build_synaptic_matrix(g)
    a = init_units(4, 100, 1)
    b = init_units(4, 100, 1)
    _, ta = self_organize(g, S, None, NoiseParams(9.0), a, 400, seed=1)
    _, tb = self_organize(g, S, None, NoiseParams(9.0), b, 200, seed=1)
    self_organize(g, S, None, NoiseParams(9.0), b, 200, seed=1, state=tb.final_state)
    assert np.array_equal(a.w, b.w)
    assert (ta.winner >= 0).any()


def test_weight_file_round_trip(tmp_path):
    u = init_units(3, 7, 0)
    p = tmp_path / "w.ngw1"
    save_weights(u.W1, p)
    assert p.read_bytes() == u.weights_to_bytes()
    assert np.array_equal(load_weights(p), u.W1)
    p.write_bytes(b"NOPE" + p.read_bytes()[4:])
    with pytest.raises(FormatError):
        load_weights(p)
    save_weights(u.W1, p)
    p.write_bytes(p.read_bytes()[:-3])
    with pytest.raises(FormatError):
        load_weights(p)


def test_trace_csv(tmp_path):
    g = build_grid_layer(6, 6)
    u = init_units(2, 36, 0)
    _, tr = self_organize(g, build_synaptic_matrix(g), None, NoiseParams(9.0), u, 50)
    p = tmp_path / "trace.csv"
    tr.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "step,winner,activation" and len(lines) == 51
    assert all("np." not in ln for ln in lines)
