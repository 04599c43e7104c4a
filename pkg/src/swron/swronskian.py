"""Symplectic Wronskian 1-chains of solution pairs.

For a real symmetric vertex operator L and two solutions psi, phi of
(L - lambda) f = 0, the chain

    W(psi, phi) = sum over unordered vertex pairs {a, b} with a block
                  of  c_ab * [canonical path a -> b]

with the skew coefficient

    c_ab = sum_ij blocks[(a, b)][i, j] * (psi_i(a) phi_j(b) - phi_i(a) psi_j(b))

has zero boundary: the net coefficient flowing into any vertex where both
eigenvalue equations hold vanishes identically.  The boundary residual at
a vertex equals (up to sign) phi(a) . (L-lambda)psi(a) minus
psi(a) . (L-lambda)phi(a), so the cycle condition is local.

Pairs are enumerated once with the lower simplex id first; the skew
symmetry c_ba = -c_ab makes the chain orientation independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .complex_core import Chain1, DomainError, canonical_path
from .operators import DiscreteOperator

__all__ = [
    "SWronskianChain",
    "CycleReport",
    "elementary_swronskian",
    "swronskian",
    "verify_cycle",
    "quantum_current",
]

CYCLE_TOL_REL = 1e-9


def _vertex_label(op: DiscreteOperator, sid: int) -> int:
    s = op.complex.simplex(sid)
    if s.dim != 0:
        raise DomainError(f"simplex {sid} is not a vertex")
    return s.vertices[0]


def _check_vertex_operator(op: DiscreteOperator, *, require_real: bool) -> None:
    if not op.is_vertex_operator():
        raise DomainError("operator blocks must join vertices only")
    if require_real and not op.is_real():
        raise DomainError("chain construction requires a real operator")
    if not op.is_symmetric():
        raise DomainError("chain construction requires a symmetric operator")


def _pair_coefficient(block: np.ndarray, pa, pb, fa, fb):
    # psi(a) . B phi(b) - phi(a) . B psi(b); B = block between a (rows) and b
    return pa @ (block @ fb) - fa @ (block @ pb)


@dataclass
class SWronskianChain:
    """A solution-pair chain plus the data it was built from."""

    chain: Chain1
    operator: DiscreteOperator
    lam: complex
    psi: dict
    phi: dict
    support: set = field(default_factory=set)

    def max_abs(self) -> float:
        return self.chain.max_abs()


@dataclass
class CycleReport:
    max_boundary_residual: float
    scale: float
    tol: float
    passed: bool
    checked_vertices: list
    excluded_vertices: list


def elementary_swronskian(
    op: DiscreteOperator, psi: dict, phi: dict, a: int, b: int
) -> Chain1:
    """Contribution of the single simplex pair (a, b) as a 1-chain.

    The diagonal pair contributes nothing (for a symmetric block the skew
    bracket cancels identically), so a == b returns the zero chain.
    """
    _check_vertex_operator(op, require_real=False)
    chain = Chain1(op.complex)
    if a == b:
        return chain
    block_ab = op.blocks.get((a, b))
    if block_ab is None:
        return chain
    la, lb = _vertex_label(op, a), _vertex_label(op, b)
    pa = np.asarray(psi[a], dtype=complex).reshape(-1)
    pb = np.asarray(psi[b], dtype=complex).reshape(-1)
    fa = np.asarray(phi[a], dtype=complex).reshape(-1)
    fb = np.asarray(phi[b], dtype=complex).reshape(-1)
    if a < b:
        coeff = _pair_coefficient(block_ab, pa, pb, fa, fb)
        path = canonical_path(op.complex, la, lb)
    else:
        # canonical form of the unordered pair: coefficient for (b, a) on the
        # path b -> a; skewness makes this the same chain as for (a, b)
        coeff = _pair_coefficient(op.blocks[(b, a)], pb, pa, fb, fa)
        path = canonical_path(op.complex, lb, la)
    for eid, sign in path.steps:
        chain.add(eid, sign * coeff)
    return chain


def swronskian(
    op: DiscreteOperator,
    lam,
    psi: dict,
    phi: dict,
    *,
    support=None,
    require_real: bool = True,
) -> SWronskianChain:
    """Assemble the full pair chain over every coupled vertex pair.

    ``support`` restricts the vertex set (default: common domain of psi
    and phi); pairs with an endpoint outside the support are skipped, so
    finite windows of infinite problems truncate gracefully.  The cycle
    property then holds at interior vertices, see :func:`verify_cycle`.
    """
    _check_vertex_operator(op, require_real=require_real)
    if support is None:
        support = set(psi.keys()) & set(phi.keys())
    else:
        support = set(support)
    chain = Chain1(op.complex)
    values_p = {}
    values_f = {}
    for sid in support:
        values_p[sid] = np.asarray(psi[sid], dtype=complex).reshape(-1)
        values_f[sid] = np.asarray(phi[sid], dtype=complex).reshape(-1)
    for (a, b), block in op.blocks.items():
        if a >= b or a not in support or b not in support:
            continue
        coeff = _pair_coefficient(block, values_p[a], values_p[b], values_f[a], values_f[b])
        if coeff == 0:
            continue
        la, lb = _vertex_label(op, a), _vertex_label(op, b)
        for eid, sign in canonical_path(op.complex, la, lb).steps:
            chain.add(eid, sign * coeff)
    return SWronskianChain(
        chain=chain, operator=op, lam=complex(lam), psi=psi, phi=phi,
        support=support,
    )


def interior_vertices(op: DiscreteOperator, support) -> list[int]:
    """Vertices of ``support`` whose whole stencil lies inside it."""
    support = set(support)
    out = []
    for sid in sorted(support):
        if all(b in support for b in op.stencil(sid)):
            out.append(sid)
    return out


def verify_cycle(
    w: SWronskianChain, *, tol_rel: float = CYCLE_TOL_REL, interior=None
) -> CycleReport:
    """Check that the chain boundary vanishes at interior vertices.

    Interior defaults to the support vertices whose full stencil lies in
    the support; fringe vertices of a truncation are reported as
    excluded, not failed.
    """
    op = w.operator
    if interior is None:
        interior = interior_vertices(op, w.support)
    interior = list(interior)
    labels = {_vertex_label(op, sid) for sid in interior}
    excluded = sorted(set(w.support) - set(interior))
    bdry = w.chain.boundary()
    residual = max((abs(bdry.get(lab, 0.0)) for lab in labels), default=0.0)
    scale = w.chain.max_abs()
    tol = tol_rel * scale
    passed = residual <= tol if scale > 0 else residual == 0.0
    return CycleReport(
        max_boundary_residual=float(residual),
        scale=float(scale),
        tol=float(tol),
        passed=bool(passed),
        checked_vertices=sorted(interior),
        excluded_vertices=excluded,
    )


def quantum_current(op: DiscreteOperator, lam, psi: dict, *, support=None) -> SWronskianChain:
    """Pair chain of a solution with its own conjugate at real lambda.

    Coefficients are purely imaginary; the boundary condition is the
    lattice Kirchhoff law for the probability current.
    """
    lam = complex(lam)
    if abs(lam.imag) > 0:
        raise DomainError("quantum current needs a real eigenvalue")
    phi = {sid: np.conj(np.asarray(v, dtype=complex)) for sid, v in psi.items()}
    return swronskian(op, lam.real, psi, phi, support=support)
