import numpy as np
import pytest

import oracles as orc
from swron import (
    transfer_map,
    DomainError,
    Tail,
    TailedGraph,
    asymptotic_subspace,
    band_scan,
    classify_monodromy,
    find_critical_points,
    regular_discrete_spectrum,
    scattering_matrix,
    swronskian_form,
    tail_modes,
    tailed_graph_from_json,
    tailed_graph_to_json,
    wave_basis,
)
from swron import examples as ex


def test_classify_free_line():
    op = ex.free_line_operator(1)
    inside = classify_monodromy(transfer_map(op, 0.5, 0))
    assert inside.counts() == (1, 0, 0)
    assert inside.identity_holds
    outside = classify_monodromy(transfer_map(op, 2.5, 0))
    assert outside.counts() == (0, 0, 1)
    assert outside.identity_holds


def test_classification_identity_random_ops():
    rng = np.random.default_rng(1)
    for _ in range(6):
        k = int(rng.integers(1, 4))
        l = int(rng.integers(1, 3))
        op = ex.random_line_operator(rng, k, l)
        for lam in rng.uniform(-4, 4, size=6):
            clf = classify_monodromy(transfer_map(op, float(lam), 0))
            if clf.critical:
                continue
            s, p, q = clf.counts()
            assert 2 * s + 4 * p + 2 * q == 2 * k * l
            assert clf.identity_holds


def test_free_line_critical_points():
    pts = find_critical_points(ex.free_line_operator(1), -3, 3, 121)
    lams = sorted(p.lam for p in pts)
    assert len(lams) == 2
    assert abs(lams[0] + 2.0) <= 1e-8
    assert abs(lams[1] - 2.0) <= 1e-8


def test_tail_mode_normalization():
    lam = 0.6
    theta = np.arccos(lam / 2)
    op = ex.free_line_operator(1)
    clf, modes = tail_modes(op, lam, origin=1)
    out = [m for m in modes if m.kind == "out"][0]
    inc = [m for m in modes if m.kind == "in"][0]
    for n in (0, 3, 7):
        want = np.exp(1j * theta * (n + 1)) / np.sqrt(2 * np.sin(theta))
        assert abs(out.value(n)[0] - want) <= 1e-12
        assert abs(inc.value(n)[0] - np.conj(want)) <= 1e-12
    # bilinear pair form of (in, out) window coordinates is exactly i
    sw = swronskian_form(op, 0).matrix
    xo = out.values(0, 1).T.reshape(-1)
    xi = inc.values(0, 1).T.reshape(-1)
    assert abs(xi @ sw @ xo - 1j) <= 1e-12


def test_wave_basis_rejects_degenerate_points():
    op = ex.free_line_operator(1)
    with pytest.raises(DomainError):
        wave_basis(op, 2.0)
    with pytest.raises(DomainError):
        wave_basis(op, 3.0)


def test_tailed_graph_validation():
    with pytest.raises(DomainError):
        TailedGraph({0: 1}, {}, [Tail(ex.free_tail(), {(5, 0): [[1.0]]})])
    with pytest.raises(DomainError):
        TailedGraph({0: 2}, {}, [Tail(ex.free_tail(), {(0, 0): [[1.0]]})])
    with pytest.raises(DomainError):
        TailedGraph({0: 1}, {(0, 0): [[1.0, 2.0]]}, [])
    with pytest.raises(DomainError):
        TailedGraph(
            {},
            {},
            [Tail(ex.free_tail(), {}), Tail(ex.free_tail(), {})],
            cross_links=[((0, 0), (0, 0), [[1.0]])],
        )


def test_expected_dim_counts_tail_orders():
    graph = ex.star_tailed(4)
    assert graph.expected_dim() == 4
    assert ex.pure_line_graph().expected_dim() == 2


def test_asymptotic_subspace_dimensions():
    for graph, want in (
        (ex.pure_line_graph(), 2),
        (ex.star_tailed(3), 3),
        (ex.two_tail_ring_core(6), 2),
    ):
        for lam in (0.37, -1.1):
            sub = asymptotic_subspace(graph, lam)
            assert sub.dim == want == sub.expected_dim
            assert sub.lagrangian_residual <= 1e-10
    # out of band the dimension count still holds
    sub = asymptotic_subspace(ex.pure_line_graph(), -2.6)
    assert sub.dim == 2


def test_pure_line_scattering_is_a_swap():
    for lam in (-1.3, 0.2, 1.5):
        res = scattering_matrix(ex.pure_line_graph(), lam)
        assert not res.flags
        assert np.max(np.abs(res.s_matrix - np.array([[0, 1], [1, 0]]))) <= 1e-10
        assert res.unitarity_residual <= 1e-12
        assert res.symmetry_residual <= 1e-12


def test_well_scattering_matches_site_oracle():
    lam = 0.7
    res = scattering_matrix(ex.potential_line(1.0), lam)
    want = orc.site_basis_s_matrix(lam, 60, well=1.0)
    assert np.max(np.abs(res.s_matrix - want)) <= 1e-8
    assert res.unitarity_residual <= 1e-10
    assert res.symmetry_residual <= 1e-10


def test_scattering_flags_critical_and_closed_points():
    res = scattering_matrix(ex.pure_line_graph(), 2.0)
    assert "critical" in res.flags
    assert res.s_matrix is None
    res = scattering_matrix(ex.pure_line_graph(), 2.7)
    assert "no-channels" in res.flags
    assert res.s_matrix is None


def test_well_bound_state_against_dense_oracle():
    states = regular_discrete_spectrum(ex.potential_line(1.0), -3.2, -2.05, 61)
    regular = [s for s in states if not s.singular]
    assert len(regular) == 1
    want = orc.well_bound_state(1.0, depth=120)
    assert abs(regular[0].lam - want) <= 1e-8
    assert not regular[0].uncertain


def test_free_line_spectrum_empty():
    assert regular_discrete_spectrum(ex.pure_line_graph(), -3.2, -2.05, 41) == []


def test_singular_core_state_detected():
    # a core vertex invisible to every tail keeps its eigenvalue
    graph = TailedGraph(
        {0: 1, 1: 1},
        {(1, 1): [[0.7]]},
        [Tail(ex.free_tail(), {(0, 0): [[1.0]]}, origin=1)],
    )
    states = regular_discrete_spectrum(graph, 0.5, 0.9, 41)
    singular = [s for s in states if s.singular]
    assert len(singular) == 1
    assert abs(singular[0].lam - 0.7) <= 1e-12


def test_band_scan_shape_and_intervals(tmp_path):
    scan = band_scan(ex.pure_line_graph(), -2.2, 2.2, 23)
    assert len(scan.rows) == 23
    insides = [r for r in scan.rows if abs(r.lam) < 1.9]
    assert all(r.counts[0] == (1, 0, 0) for r in insides)
    spans = scan.open_intervals()
    assert len(spans) == 1
    lo, hi = spans[0]
    assert lo <= -1.7 and hi >= 1.7
    p = tmp_path / "scan.csv"
    scan.to_csv(str(p))
    lines = p.read_text().strip().splitlines()
    assert len(lines) == 24
    head = lines[0].split(",")
    assert head[:6] == ["lambda", "s", "p", "q", "critical_flag", "singular_flag"]
    assert "S_re[0c0->1c0]" in head
    data = scan.to_json_dict()
    assert len(data["rows"]) == 23
    assert data["open_intervals"]


def test_tailed_graph_json_roundtrip():
    for graph in (
        ex.pure_line_graph(),
        ex.potential_line(0.8),
        ex.two_tail_ring_core(6),
    ):
        back = tailed_graph_from_json(tailed_graph_to_json(graph))
        assert back.n_tails == graph.n_tails
        assert back.expected_dim() == graph.expected_dim()
        assert back.core_dims == graph.core_dims
        assert np.array_equal(back.core_matrix(), graph.core_matrix())
        for t1, t2 in zip(back.tails, graph.tails):
            assert t1.origin == t2.origin
            assert set(t1.attach) == set(t2.attach)
        assert len(back.cross_links) == len(graph.cross_links)
        lam = 0.43
        a = scattering_matrix(graph, lam, depth=25)
        b = scattering_matrix(back, lam, depth=25)
        assert np.max(np.abs(a.s_matrix - b.s_matrix)) <= 1e-12
