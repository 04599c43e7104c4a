import numpy as np
import pytest

from swron import (
    Chain1,
    DomainError,
    SimplicialComplex,
    barycentric_subdivision,
    canonical_path,
    complex_from_json,
    complex_to_json,
    load_complex,
    materialize_tails,
    save_complex,
)
from swron import examples as ex


def test_closure_and_f_vector():
    cx = ex.filled_triangle()
    assert cx.f_vector() == (3, 3, 1)
    assert cx.euler_characteristic() == 1
    assert cx.has_simplex((0, 1))
    assert cx.has_simplex((2,))


def test_ids_roundtrip():
    cx = ex.circle(4)
    for s in cx.simplices:
        assert cx.id_of(s.vertices) == s.id
    for v in cx.vertex_labels:
        assert cx.simplex(cx.vertex_sid(v)).vertices == (v,)
    eid = cx.edge_sid(0, 1)
    assert set(cx.simplex(eid).vertices) == {0, 1}


def test_bad_simplices_rejected():
    with pytest.raises(DomainError):
        SimplicialComplex([(-1, 0)])
    with pytest.raises(DomainError):
        SimplicialComplex([(0, 0)])
    cx = ex.interval(2)
    with pytest.raises(DomainError):
        cx.id_of((0, 2))


def test_boundary_of_boundary_vanishes():
    for cx in (ex.sphere_complex(), ex.torus_complex(), ex.filled_triangle()):
        for k in range(2, cx.dim + 1):
            prod = cx.boundary_matrix(k - 1) @ cx.boundary_matrix(k)
            assert not np.any(prod)


def test_distance_metric_axioms():
    rng = np.random.default_rng(3)
    cx = ex.random_complex(rng, 40)
    sids = [s.id for s in cx.simplices]
    pick = rng.choice(sids, size=min(8, len(sids)), replace=False)
    for a in pick:
        assert cx.distance(a, a) == 0
        for b in pick:
            dab = cx.distance(a, b)
            assert dab == cx.distance(b, a)
            for c in pick[:4]:
                assert dab <= cx.distance(a, c) + cx.distance(c, b)


def test_girth():
    assert ex.circle(5).girth() == 5
    assert ex.interval(4).girth() == float("inf")


def test_canonical_path_endpoints_and_determinism():
    cx = ex.circle(6)
    path = canonical_path(cx, 0, 2)
    chain = Chain1(cx)
    for eid, sign in path.steps:
        chain.add(eid, sign)
    bd = {v: c for v, c in chain.boundary().items() if c != 0}
    assert bd == {2: 1, 0: -1}
    assert len(path) == cx.distance(cx.vertex_sid(0), cx.vertex_sid(2))
    again = canonical_path(cx, 0, 2)
    assert again.steps == path.steps


def test_canonical_path_lex_least_tie_break():
    # opposite vertices of a 4-cycle: two minimal paths, the one through
    # the smaller edge ids wins
    cx = ex.circle(4)
    path = canonical_path(cx, 0, 2)
    eids = [eid for eid, _ in path.steps]
    other = canonical_path(cx, 2, 0)
    assert len(path) == len(other) == 2
    assert eids == sorted(eids)
    assert eids[0] == min(cx.edge_sids)


def test_path_reversed_flips_signs():
    cx = ex.interval(5)
    p = canonical_path(cx, 1, 4)
    r = p.reversed()
    assert [(e, -s) for e, s in p.steps][::-1] == r.steps


def test_subdivision_doubles_distance():
    cx = ex.filled_triangle()
    sub, centers = barycentric_subdivision(cx)
    assert len(sub.vertex_labels) == len(cx)
    for a in cx.simplices:
        for b in cx.simplices:
            da = cx.distance(a.id, b.id)
            dv = sub.distance(
                sub.vertex_sid(centers[a.id]), sub.vertex_sid(centers[b.id])
            )
            assert dv == 2 * da


def test_complex_json_roundtrip(tmp_path):
    cx = ex.wedge_two_circles(3, 4)
    p = tmp_path / "cx.json"
    save_complex(cx, str(p))
    back = load_complex(str(p))
    assert back.f_vector() == cx.f_vector()
    assert set(s.vertices for s in back.simplices) == set(
        s.vertices for s in cx.simplices
    )
    with pytest.raises(DomainError):
        complex_from_json({"wrong": []})


def test_materialize_tails():
    data = complex_to_json(ex.interval(1))
    data["tails"] = [{"orbits": 1, "edges": [[0, 0, 1]], "attach": [[1, 0]]}]
    cx = complex_from_json(data)
    big, site_map = materialize_tails(cx, 3)
    assert len(big.vertex_labels) == len(cx.vertex_labels) + 3
    # consecutive tail sites are adjacent, and the first hangs off vertex 1
    labs = [site_map[(0, 0, n)] for n in range(3)]
    for a, b in zip(labs, labs[1:]):
        assert big.distance(big.vertex_sid(a), big.vertex_sid(b)) == 1
    assert big.distance(big.vertex_sid(1), big.vertex_sid(labs[0])) == 1
