"""Reference computations for the test suite.

Each helper rebuilds its quantity directly from matrix entries or closed
forms, along a route disjoint from the one the package uses, so equality
checks really compare two independent calculations.
"""
from __future__ import annotations

import numpy as np

from swron import DiscreteOperator, SimplicialComplex, elementary_swronskian


def betti_via_ranks(cx) -> list[int]:
    """Betti numbers from ranks of the raw boundary matrices."""
    dims = cx.f_vector()
    top = len(dims) - 1
    out = []
    for k in range(top + 1):
        rk = np.linalg.matrix_rank(cx.boundary_matrix(k)) if k >= 1 else 0
        rk1 = np.linalg.matrix_rank(cx.boundary_matrix(k + 1)) if k < top else 0
        out.append(int(dims[k] - rk - rk1))
    return out


def dirichlet_well_matrix(v: float, depth: int) -> np.ndarray:
    """Dense lattice well on sites -depth..depth with hard walls."""
    n = 2 * depth + 1
    m = np.zeros((n, n))
    for i in range(n - 1):
        m[i, i + 1] = m[i + 1, i] = 1.0
    m[depth, depth] = -float(v)
    return m


def well_bound_state(v: float, depth: int = 200) -> float:
    """Lowest eigenvalue below the band of the truncated well."""
    vals = np.linalg.eigvalsh(dirichlet_well_matrix(v, depth))
    below = vals[vals < -2.0]
    assert below.size == 1
    return float(below[0])


def site_basis_s_matrix(lam: float, depth: int, *, well: float | None = None) -> np.ndarray:
    """Two-tail scattering matrix from a raw site-basis truncation.

    Unknowns are the plain site values (plus the core site when a well is
    present); no modal reduction is involved anywhere.  The far ends are
    fit against explicit plane waves normalized to unit current, and the
    matrix is read off as out-amplitudes per unit in-amplitude.
    """
    theta = float(np.arccos(lam / 2.0))
    mu = np.exp(1j * theta)
    tau = 2.0 * np.sin(theta)
    origins = (1, 1) if well is not None else (1, 0)

    # unknown layout: [core site] + tail0 sites 0..depth + tail1 sites 0..depth
    nt = depth + 1
    nc = 1 if well is not None else 0
    nun = nc + 2 * nt

    def idx(j: int, n: int) -> int:
        return nc + j * nt + n

    rows = []

    def row() -> np.ndarray:
        rows.append(np.zeros(nun, dtype=complex))
        return rows[-1]

    if well is not None:
        r = row()
        r[0] = -well - lam
        r[idx(0, 0)] = 1.0
        r[idx(1, 0)] = 1.0
    for j in (0, 1):
        r = row()
        r[idx(j, 0)] = -lam
        r[idx(j, 1)] = 1.0
        if well is not None:
            r[0] = 1.0
        else:
            r[idx(1 - j, 0)] = 1.0
        for n in range(1, depth):
            r = row()
            r[idx(j, n)] = -lam
            r[idx(j, n - 1)] = 1.0
            r[idx(j, n + 1)] = 1.0

    a = np.array(rows)
    _, sing, vt = np.linalg.svd(a)
    null = vt[int(np.sum(sing > 1e-8 * sing[0])):].conj().T
    assert null.shape[1] == 2, null.shape

    def fit(j: int, vec: np.ndarray) -> np.ndarray:
        # v(n) = A in(n) + B out(n) on the last two sites of tail j
        o = origins[j]
        f = np.array(
            [
                [np.conj(mu) ** (depth - 1 + o), mu ** (depth - 1 + o)],
                [np.conj(mu) ** (depth + o), mu ** (depth + o)],
            ]
        ) / np.sqrt(tau)
        rhs = np.array([vec[idx(j, depth - 1)], vec[idx(j, depth)]])
        return np.linalg.solve(f, rhs)

    c_in = np.zeros((2, 2), dtype=complex)
    c_out = np.zeros((2, 2), dtype=complex)
    for i in range(2):
        for j in (0, 1):
            ab = fit(j, null[:, i])
            c_in[j, i] = ab[0]
            c_out[j, i] = ab[1]
    return c_out @ np.linalg.inv(c_in)


def path_hosted_operator(lop, lo: int, hi: int):
    """Rehost a lattice operator as a vertex operator on a path graph.

    Vertex label of site n is n - lo (labels must be non-negative), so
    chain coefficients live on edge (n - lo, n - lo + 1).  Returns
    (complex, operator, base) with base = lo.
    """
    cx = SimplicialComplex([(n - lo, n - lo + 1) for n in range(lo, hi)])
    blocks = {}
    for n in range(lo, hi + 1):
        for s in range(-lop.k, lop.k + 1):
            if s == 0 or not (lo <= n + s <= hi):
                continue
            b = lop.block(n, s)
            if np.any(b):
                blocks[(cx.vertex_sid(n - lo), cx.vertex_sid(n - lo + s))] = b
    return cx, DiscreteOperator(cx, lop.l, blocks), lo


def chain_form_entry(
    cx, vop, base: int, m: int, a_site: int, i: int, b_site: int, j: int
) -> complex:
    """Pair-chain coefficient on edge (m, m+1) for unit cochains.

    psi is the i-th unit vector at a_site, phi the j-th at b_site; only
    the single pair (a_site, b_site) contributes, so the elementary chain
    is the whole chain.  ``base`` is the label shift of the path host.
    """
    l = vop.vec_dim
    sa, sb = cx.vertex_sid(a_site - base), cx.vertex_sid(b_site - base)
    ea = np.zeros(l)
    ea[i] = 1.0
    eb = np.zeros(l)
    eb[j] = 1.0
    psi = {sa: ea, sb: np.zeros(l)}
    phi = {sa: np.zeros(l), sb: eb}
    if sa == sb:
        psi = {sa: ea}
        phi = {sa: eb}
    chain = elementary_swronskian(vop, psi, phi, sa, sb)
    eid = cx.edge_sid(m - base, m - base + 1)
    return complex(chain.coeffs.get(eid, 0.0))


def central_gradient(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Plain central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g
