import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neurogrow.analysis import (bump_count, detect_waves, extract_pools, jacobian_stability,
                                pool_extents, rate_fixed_points_bruteforce,
                                rate_fixed_points_iterative, reference_line_layout,
                                robust_bump, scaling_benchmark, simulate_rate_model,
                                tiling_coverage, wave_stats)
from neurogrow.analysis._geom import components, max_pairwise
from neurogrow.analysis.fixed_points import FixedPoint, excitatory_graph, field_of
from neurogrow.analysis.scaling import grid_shape, scaling_to_csv
from neurogrow.analysis.waves import stats_to_csv, waves_to_csv
from neurogrow.errors import SizeLimitError
from neurogrow.topology import (LayerGeometry, ablate_nodes, build_grid_layer,
                                build_synaptic_matrix)


def line(n):
    return LayerGeometry(np.column_stack([np.arange(n, dtype=float), np.zeros(n)]))


# ------------------------------------------------------------------ waves

def test_empty_raster():
    g = build_grid_layer(3, 3)
    stats, waves = detect_waves(np.zeros((0, 9), bool), g)
    assert stats == [] and waves == []


def test_single_active_node():
    g = build_grid_layer(3, 3)
    r = np.zeros((1, 9), bool)
    r[0, 4] = True
    st_ = wave_stats(r, g)[0]
    assert st_.n_components == 1 and st_.extents[0] == 0.0


def test_scripted_moving_cluster():
    g = build_grid_layer(1, 20)
    r = np.zeros((11, 20), bool)
    for t in range(11):
        r[t, t:t + 3] = True
    _, waves = detect_waves(r, g)
    assert len(waves) == 1
    w = waves[0]
    assert w.displacement == pytest.approx(10.0)
    assert w.lifetime == 10 and w.n_frames == 11
    assert w.extent == pytest.approx(2.0)


def test_stationary_cluster_is_not_a_wave():
    g = build_grid_layer(1, 20)
    r = np.zeros((12, 20), bool)
    r[:, 5:8] = True
    assert detect_waves(r, g)[1] == []


def test_short_event_is_not_a_wave():
    g = build_grid_layer(1, 20)
    r = np.zeros((4, 20), bool)
    for t in range(4):
        r[t, 3 * t:3 * t + 3] = True
    assert detect_waves(r, g, K=5)[1] == []


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.floats(0.05, 0.6))
def test_components_partition_active_nodes(seed, p):
    g = build_grid_layer(8, 9)
    rng = np.random.default_rng(seed)
    r = rng.random((5, g.n_nodes)) < p
    for s in wave_stats(r, g):
        allm = np.concatenate(s.components) if s.components else np.zeros(0, int)
        assert np.array_equal(np.sort(allm), np.flatnonzero(r[s.step]))
        if s.active:
            assert s.n_components >= 1


def test_wave_csvs(tmp_path):
    g = build_grid_layer(1, 20)
    r = np.zeros((11, 20), bool)
    for t in range(11):
        r[t, t:t + 3] = True
    stats, waves = detect_waves(r, g)
    waves_to_csv(waves, tmp_path / "w.csv")
    stats_to_csv(stats, tmp_path / "s.csv")
    assert len((tmp_path / "w.csv").read_text().splitlines()) == 2
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 12


def test_max_pairwise_hull_path_agrees():
    pts = np.random.default_rng(0).random((600, 2))
    from scipy.spatial.distance import pdist
    assert max_pairwise(pts) == pytest.approx(pdist(pts).max())


# ------------------------------------------------------------------ pools

def test_one_hot_column_singleton_pool():
    g = build_grid_layer(4, 4)
    w = np.zeros((16, 1))
    w[5, 0] = 1.0
    (p,) = extract_pools(w, g)
    assert list(p.members) == [5] and not p.flagged and p.extent == 0


def test_uniform_column_flagged():
    g = build_grid_layer(4, 4)
    (p,) = extract_pools(np.ones((16, 1)), g, frac=0.5)
    assert len(p.members) == 16 and p.flagged


def test_non_contiguous_pool_flagged():
    g = build_grid_layer(10, 10)
    w = np.zeros((100, 1))
    w[[0, 99], 0] = 1.0
    (p,) = extract_pools(w, g)
    assert p.flagged and p.reason == "not contiguous"


def test_pools_exclude_dead_nodes():
    g = ablate_nodes(build_grid_layer(5, 5), [12])
    w = np.zeros((25, 1))
    w[[11, 12, 13], 0] = 1.0
    (p,) = extract_pools(w, g)
    assert 12 not in p.members


def test_frac_validated():
    with pytest.raises(ValueError):
        extract_pools(np.ones((4, 1)), build_grid_layer(2, 2), frac=1.0)


def test_coverage_limits():
    g = build_grid_layer(4, 4)
    assert tiling_coverage([], g) == 0.0
    w = np.zeros((16, 4))
    for j, (r, c) in enumerate([(0, 0), (0, 2), (2, 0), (2, 2)]):
        for dr in (0, 1):
            for dc in (0, 1):
                w[(r + dr) * 4 + c + dc, j] = 1.0
    pools = extract_pools(w, g)
    assert tiling_coverage(pools, g) == 1.0
    assert len(pool_extents(pools)) == 4


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.floats(1e-3, 1e3))
def test_pool_extraction_scale_invariant(seed, k):
    g = build_grid_layer(6, 6)
    w = np.random.default_rng(seed).random((36, 3))
    a = extract_pools(w, g)
    b = extract_pools(w * k, g)
    for pa, pb in zip(a, b):
        assert np.array_equal(pa.members, pb.members)


# ------------------------------------------------------------ fixed points

def test_zero_matrix_fixed_point_convention():
    pts = rate_fixed_points_bruteforce(np.zeros((3, 3)))
    assert len(pts) == 1
    assert pts[0].active_set == (0, 1, 2) and not pts[0].x.any()
    rep = jacobian_stability(pts[0])
    assert rep.stable is None and not rep.differentiable


def test_bruteforce_size_limit():
    with pytest.raises(SizeLimitError):
        rate_fixed_points_bruteforce(np.zeros((17, 17)))


def test_five_node_line_has_single_bump():
    g = line(5)
    S = build_synaptic_matrix(g).weights
    adj = excitatory_graph(S)
    pts = rate_fixed_points_bruteforce(S)
    assert any(bump_count(p.active_set, adj) == 1 for p in pts)


def test_bruteforce_points_are_consistent():
    S = build_synaptic_matrix(build_grid_layer(3, 4)).weights
    for p in rate_fixed_points_bruteforce(S):
        mask = np.zeros(12, bool)
        mask[list(p.active_set)] = True
        assert np.array_equal(p.x >= 0, mask)
        assert p.residual == 0


@pytest.mark.parametrize("n", [6, 9, 12])
def test_iterative_subset_of_bruteforce_line(n):
    S = build_synaptic_matrix(line(n)).weights
    brute = {p.active_set for p in rate_fixed_points_bruteforce(S)}
    it = rate_fixed_points_iterative(S, starts=100, seed=n)
    assert it
    for p in it:
        assert p.active_set in brute and p.residual <= 1e-10


def test_iterative_from_known_point():
    S = build_synaptic_matrix(reference_line_layout()).weights
    fp = robust_bump(S, starts=100)
    pts = rate_fixed_points_iterative(S, starts=1, seed=0, initial=[fp.x])
    assert fp.active_set in {p.active_set for p in pts}
    hit = next(p for p in pts if p.active_set == fp.active_set)
    assert hit.residual == 0 and np.array_equal(hit.x, fp.x)


def test_two_d_layout_has_one_and_two_bumps():
    S = build_synaptic_matrix(build_grid_layer(16, 16)).weights
    adj = excitatory_graph(S)
    pts = rate_fixed_points_iterative(S, starts=200, seed=0)
    classes = {bump_count(p.active_set, adj) for p in pts}
    assert {1, 2} <= classes


@pytest.mark.parametrize("tau,lam", [(1.0, -1.0), (2.0, -0.5)])
def test_stability_exact(tau, lam):
    S = build_synaptic_matrix(line(8)).weights
    for p in rate_fixed_points_bruteforce(S):
        if p.strict:
            rep = jacobian_stability(p, S, tau)
            assert rep.stable and rep.multiplicity == 8
            assert np.all(rep.eigenvalues == lam)


def test_stability_kink_and_validation():
    fp = FixedPoint(np.array([1.0, 0.0]), (0, 1), 0.0)
    assert jacobian_stability(fp).stable is None
    with pytest.raises(ValueError):
        jacobian_stability(fp, tau_d=0)


# --------------------------------------------------------------- rate model

def test_rate_model_quiet_bump_stays():
    S = build_synaptic_matrix(reference_line_layout()).weights
    fp = robust_bump(S)
    assert fp is not None and 0 < len(fp.active_set) < 90
    tr = simulate_rate_model(S, sigma2=0.0, steps=10_000, x0=fp.x,
                             positions=reference_line_layout().positions)
    assert tr.transitions == 0
    assert np.array_equal(np.flatnonzero(tr.x_final >= 0), list(fp.active_set))


def test_rate_model_noise_moves_bump():
    g = reference_line_layout()
    S = build_synaptic_matrix(g).weights
    fp = robust_bump(S)
    tr = simulate_rate_model(S, sigma2=9.0, steps=3000, x0=fp.x, positions=g.positions, seed=1)
    assert tr.transitions >= 3
    again = simulate_rate_model(S, sigma2=9.0, steps=3000, x0=fp.x, positions=g.positions, seed=1)
    assert again.transitions == tr.transitions and np.array_equal(again.x_final, tr.x_final)


def test_rate_model_validation():
    with pytest.raises(ValueError):
        simulate_rate_model(np.zeros((2, 2)), steps=0)
    with pytest.raises(ValueError):
        simulate_rate_model(np.zeros((2, 2)), tau_d=0)


def test_field_matches_matrix_product():
    S = build_synaptic_matrix(build_grid_layer(4, 4)).weights
    mask = np.arange(16) % 3 == 0
    assert np.allclose(field_of(S, mask), S @ mask.astype(float))


# ------------------------------------------------------------------ scaling

def test_grid_shape():
    assert grid_shape(1500) == (30, 50)
    assert grid_shape(10_000) == (100, 100)
    assert grid_shape(7) == (1, 7)


def test_scaling_rejects_decreasing_sizes():
    with pytest.raises(ValueError):
        scaling_benchmark([400, 100])


def test_scaling_small_run(tmp_path):
    rows = scaling_benchmark([100, 225], step_cap=2000, check_every=500)
    assert [r.n_nodes for r in rows] == [100, 225]
    for r in rows:
        assert r.peak_components >= r.median_components >= 0
        assert r.converged or r.steps_to_tiling == 2000
    scaling_to_csv(rows, tmp_path / "s.csv")
    text = (tmp_path / "s.csv").read_text()
    assert text.splitlines()[0].startswith("n_nodes")
    assert "wall" not in text
