import numpy as np
import pytest

from swron import (
    DiscreteOperator,
    DomainError,
    elementary_swronskian,
    interior_vertices,
    quantum_current,
    swronskian,
    to_vertex_operator,
    verify_cycle,
)
from swron import examples as ex
from swron.verify import kernel_solutions


def two_site_operator():
    cx = ex.interval(1)
    a, b = cx.vertex_sid(0), cx.vertex_sid(1)
    block = np.array([[1.0, 2.0], [3.0, 4.0]])
    return cx, a, b, DiscreteOperator(cx, 2, {(a, b): block, (b, a): block.T})


def test_pair_coefficient_convention_pinned():
    # c_ab = psi(a) . (B phi(b)) - phi(a) . (B psi(b)) on the oriented edge
    cx, a, b, op = two_site_operator()
    psi = {a: np.array([1.0, 0.0]), b: np.array([0.0, 2.0])}
    phi = {a: np.array([0.0, 1.0]), b: np.array([3.0, 0.0])}
    block = op.blocks[(a, b)]
    want = psi[a] @ (block @ phi[b]) - phi[a] @ (block @ psi[b])
    chain = elementary_swronskian(op, psi, phi, a, b)
    eid = cx.edge_sid(0, 1)
    assert chain.coeffs[eid] == want
    # [1,0].([3,9]) - [0,1].([4,8])
    assert want == -5.0


def test_elementary_diagonal_pair_vanishes():
    cx, a, b, op = two_site_operator()
    psi = {a: np.array([1.0, 2.0])}
    phi = {a: np.array([3.0, 4.0])}
    chain = elementary_swronskian(op, psi, phi, a, a)
    assert chain.max_abs() == 0.0


def test_swronskian_is_skew():
    rng = np.random.default_rng(7)
    cx = ex.circle(6)
    op = ex.adjacency_operator(cx, vec_dim=2)
    psi = {cx.vertex_sid(v): rng.standard_normal(2) for v in cx.vertex_labels}
    phi = {cx.vertex_sid(v): rng.standard_normal(2) for v in cx.vertex_labels}
    w1 = swronskian(op, 0.3, psi, phi)
    w2 = swronskian(op, 0.3, phi, psi)
    for eid, c in w1.chain.coeffs.items():
        assert w2.chain.coeffs.get(eid, 0.0) == -c


def test_non_vertex_operator_rejected():
    cx = ex.filled_triangle()
    hop = __import__("swron").build_hodge(cx).operator
    psi = {s.id: np.zeros(1) for s in cx.simplices}
    with pytest.raises(DomainError):
        swronskian(hop, 0.0, psi, psi)


def test_kernel_pair_chain_is_closed():
    rng = np.random.default_rng(11)
    cx = ex.random_complex(rng, 40)
    raw = ex.random_operator(rng, cx, vec_dim=2, max_steps=2)
    vop, sub, centers = to_vertex_operator(raw)
    domain = [sub.vertex_sid(v) for v in sub.vertex_labels]
    free = [sub.vertex_sid(centers[s.id]) for s in cx.simplices][-3:]
    lam = 0.37
    (psi, phi), imposed = kernel_solutions(vop, lam, free, rng, sids=domain)
    w = swronskian(vop, lam, psi, phi)
    rep = verify_cycle(w, interior=imposed)
    assert rep.passed
    assert rep.max_boundary_residual <= 1e-9 * max(rep.scale, 1e-300)
    assert set(rep.excluded_vertices) == set(domain) - set(imposed)


def test_verify_cycle_catches_broken_solutions():
    rng = np.random.default_rng(13)
    cx = ex.circle(8)
    op = ex.graph_laplacian(cx)
    domain = [cx.vertex_sid(v) for v in cx.vertex_labels]
    (psi, phi), imposed = kernel_solutions(op, 0.5, domain[-3:], rng, sids=domain)
    psi[domain[0]] = psi[domain[0]] + 0.5
    w = swronskian(op, 0.5, psi, phi)
    rep = verify_cycle(w, interior=imposed)
    assert not rep.passed


def test_support_truncation_excludes_fringe():
    cx = ex.interval(9)
    op = ex.adjacency_operator(cx)
    theta = 0.9
    psi = {
        cx.vertex_sid(j): np.array([np.sin(theta * (j + 1))]) for j in range(10)
    }
    phi = {
        cx.vertex_sid(j): np.array([np.cos(theta * (j + 1))]) for j in range(10)
    }
    support = [cx.vertex_sid(j) for j in range(2, 8)]
    w = swronskian(op, 2 * np.cos(theta), psi, phi, support=support)
    inner = interior_vertices(op, support)
    assert set(inner) == {cx.vertex_sid(j) for j in range(3, 7)}
    rep = verify_cycle(w)
    assert rep.passed
    assert set(rep.excluded_vertices) == {cx.vertex_sid(2), cx.vertex_sid(7)}


def test_quantum_current_plane_wave():
    n = 20
    cx = ex.interval(n)
    op = ex.adjacency_operator(cx)
    theta = 0.7
    wave = {
        cx.vertex_sid(j): np.array([np.exp(1j * theta * j)]) for j in range(n + 1)
    }
    cur = quantum_current(op, 2 * np.cos(theta), wave)
    vals = list(cur.chain.coeffs.values())
    target = -2j * np.sin(theta)
    assert max(abs(v - target) for v in vals) <= 1e-12


def test_quantum_current_rejects_complex_lambda():
    cx = ex.interval(3)
    op = ex.adjacency_operator(cx)
    wave = {cx.vertex_sid(j): np.array([1.0]) for j in range(4)}
    with pytest.raises(DomainError):
        quantum_current(op, 1.0 + 0.2j, wave)


def test_complex_blocks_need_opt_in():
    cx = ex.interval(2)
    a, b, c = (cx.vertex_sid(v) for v in range(3))
    blocks = {
        (a, b): [[1.0 + 1.0j]],
        (b, a): [[1.0 + 1.0j]],
        (b, c): [[1.0]],
        (c, b): [[1.0]],
    }
    op = DiscreteOperator(cx, 1, blocks)
    vals = {s: np.ones(1) for s in (a, b, c)}
    with pytest.raises(DomainError):
        swronskian(op, 0.0, vals, vals)
    swronskian(op, 0.0, vals, vals, require_real=False)
