"""Discrete Lagrangian field systems on graphs and their linearization.

A system is a dim <= 1 complex together with interaction terms: each
term owns an ordered tuple Q of vertices and a density, a smooth
function of the field values on Q.  The action of a finite field
configuration is the sum of the densities; its derivative with respect
to the value at P (the Euler-Lagrange residual) involves only the
interactions containing P, so stationarity is a local condition.

Linearizing the residual map at a configuration gives a block operator
whose blocks are the mixed second derivatives summed over shared
interactions; for a stationary point the operator is symmetric, and the
symplectic Wronskian of two kernel variations is again a conserved
1-chain (the variational pair form).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .complex_core import DomainError, SimplicialComplex
from .operators import DiscreteOperator
from .swronskian import SWronskianChain, swronskian

__all__ = [
    "Density",
    "DiscreteLagrangianSystem",
    "DegeneracyError",
    "NonConvergenceError",
    "LinearizeResult",
    "quadratic_pair_density",
    "standard_map_density",
    "expression_density",
    "DENSITIES",
    "el_residual",
    "local_action",
    "dynamical_step",
    "linearize",
    "variational_swronskian",
    "build_translation_invariant",
    "build_homogeneous_order4",
]


class DegeneracyError(DomainError):
    """A cross Hessian needed for stepping is singular."""


class NonConvergenceError(RuntimeError):
    """Newton iteration failed to reach tolerance."""


_FD_STEP = float(np.cbrt(np.finfo(float).eps))


class Density:
    """Interaction density of ``nvars`` vector slots.

    ``value(xs)`` maps a list of slot vectors to a float.  ``grad`` and
    ``hess`` may be omitted; central finite differences fill in, with
    the ``uses_fd`` flag set so downstream code can flag the reduced
    accuracy instead of hiding it.
    """

    def __init__(self, nvars, value, grad=None, hess=None, name=""):
        self.nvars = int(nvars)
        self._value = value
        self._grad = grad
        self._hess = hess
        self.name = name or "density"
        self.uses_fd = grad is None or hess is None

    def value(self, xs) -> float:
        return float(self._value(*xs))

    def grad(self, xs, slot: int) -> np.ndarray:
        if self._grad is not None:
            return np.asarray(self._grad(slot, *xs), dtype=float).reshape(-1)
        x = np.asarray(xs[slot], dtype=float).reshape(-1)
        out = np.zeros_like(x)
        for i in range(len(x)):
            h = _FD_STEP * max(1.0, abs(x[i]))
            up, dn = x.copy(), x.copy()
            up[i] += h
            dn[i] -= h
            out[i] = (
                self.value(xs[:slot] + [up] + xs[slot + 1 :])
                - self.value(xs[:slot] + [dn] + xs[slot + 1 :])
            ) / (2 * h)
        return out

    def hess(self, xs, slot_a: int, slot_b: int) -> np.ndarray:
        if self._hess is not None:
            return np.atleast_2d(
                np.asarray(self._hess(slot_a, slot_b, *xs), dtype=float)
            )
        xb = np.asarray(xs[slot_b], dtype=float).reshape(-1)
        na = len(np.asarray(xs[slot_a], dtype=float).reshape(-1))
        out = np.zeros((na, len(xb)))
        for j in range(len(xb)):
            h = _FD_STEP * max(1.0, abs(xb[j]))
            up, dn = xb.copy(), xb.copy()
            up[j] += h
            dn[j] -= h
            gu = self.grad(xs[:slot_b] + [up] + xs[slot_b + 1 :], slot_a)
            gd = self.grad(xs[:slot_b] + [dn] + xs[slot_b + 1 :], slot_a)
            out[:, j] = (gu - gd) / (2 * h)
        return out


def quadratic_pair_density(weight: float = 1.0) -> Density:
    """0.5 * weight * |x - y|^2 on an edge."""
    w = float(weight)
    return Density(
        2,
        lambda x, y: 0.5 * w * float(np.sum((np.asarray(x) - np.asarray(y)) ** 2)),
        grad=lambda slot, x, y: w * (np.asarray(x) - np.asarray(y)) * (1 if slot == 0 else -1),
        hess=lambda a, b, x, y: w * np.eye(np.size(x)) * (1 if a == b else -1),
        name="quadratic",
    )


def standard_map_density(kick: float = 1.0) -> Density:
    """0.5 (x - y)^2 + kick * cos(x) on an edge of the line (scalar)."""
    kk = float(kick)

    def val(x, y):
        x = float(np.asarray(x).reshape(()))
        y = float(np.asarray(y).reshape(()))
        return 0.5 * (x - y) ** 2 + kk * math.cos(x)

    def grad(slot, x, y):
        x = float(np.asarray(x).reshape(()))
        y = float(np.asarray(y).reshape(()))
        if slot == 0:
            return np.array([x - y - kk * math.sin(x)])
        return np.array([y - x])

    def hess(a, b, x, y):
        x = float(np.asarray(x).reshape(()))
        if a == b == 0:
            return np.array([[1.0 - kk * math.cos(x)]])
        if a == b:
            return np.array([[1.0]])
        return np.array([[-1.0]])

    return Density(2, val, grad=grad, hess=hess, name="standard-map")


def expression_density(nvars: int, expr: str, name: str = "expr") -> Density:
    """Scalar density from a Python expression in x0..x{nvars-1}.

    Derivatives come from finite differences (``uses_fd`` stays True).
    The expression is evaluated with numpy and math available and
    nothing else.
    """
    code = compile(expr, "<density>", "eval")
    space = {"np": np, "math": math, "__builtins__": {}}

    def val(*xs):
        local = dict(space)
        for i, x in enumerate(xs):
            local[f"x{i}"] = float(np.asarray(x).reshape(()))
        return float(eval(code, local))

    return Density(nvars, val, name=name)


DENSITIES = {
    "quadratic": quadratic_pair_density,
    "standard-map": standard_map_density,
}


@dataclass
class Interaction:
    vertices: tuple[int, ...]
    density: Density


class DiscreteLagrangianSystem:
    """Graph, chart dimensions, and interaction list.

    Parameters
    ----------
    graph : SimplicialComplex of dimension <= 1.
    interactions : iterable of (vertex tuple, Density).
    chart_dims : int or dict vertex label -> dimension.
    allow_ends : permit vertices lying in fewer than two edges (finite
        truncations of infinite graphs need this).
    """

    def __init__(self, graph, interactions, chart_dims=1, *, allow_ends=False):
        if graph.dim > 1:
            raise DomainError("lagrangian systems live on graphs (dim <= 1)")
        self.graph = graph
        labels = graph.vertex_labels
        if isinstance(chart_dims, dict):
            self.chart_dims = {int(v): int(chart_dims.get(v, 1)) for v in labels}
        else:
            self.chart_dims = {v: int(chart_dims) for v in labels}
        if not allow_ends:
            for v in labels:
                if len(graph._skeleton[v]) < 2:
                    raise DomainError(
                        f"vertex {v} lies in fewer than two edges; "
                        "pass allow_ends=True for truncated graphs"
                    )
        self.interactions: list[Interaction] = []
        self._at_vertex: dict[int, list[int]] = {v: [] for v in labels}
        for vs, dens in interactions:
            vs = tuple(int(v) for v in vs)
            for v in vs:
                if v not in self._at_vertex:
                    raise DomainError(f"interaction uses unknown vertex {v}")
            if len(vs) != dens.nvars:
                raise DomainError(
                    f"interaction {vs} has {len(vs)} slots but density "
                    f"expects {dens.nvars}"
                )
            if len(set(vs)) != len(vs):
                raise DomainError(f"interaction {vs} repeats a vertex")
            idx = len(self.interactions)
            self.interactions.append(Interaction(vs, dens))
            for v in vs:
                self._at_vertex[v].append(idx)

    def neighborhood(self, v: int) -> set[int]:
        """Vertices sharing an interaction with v (v included)."""
        out = {v}
        for idx in self._at_vertex[v]:
            out.update(self.interactions[idx].vertices)
        return out

    def uses_fd(self) -> bool:
        return any(i.density.uses_fd for i in self.interactions)


def _slot_values(sys: DiscreteLagrangianSystem, inter: Interaction, psi: dict):
    xs = []
    for v in inter.vertices:
        if v not in psi:
            raise DomainError(f"psi undefined at vertex {v}")
        xs.append(np.asarray(psi[v], dtype=float).reshape(-1))
    return xs


def local_action(sys: DiscreteLagrangianSystem, psi: dict, around=None) -> float:
    """Sum of densities; restricted to interactions meeting ``around``."""
    if around is None:
        idxs = range(len(sys.interactions))
    else:
        idxs = sorted({i for v in around for i in sys._at_vertex[v]})
    total = 0.0
    for i in idxs:
        inter = sys.interactions[i]
        total += inter.density.value(_slot_values(sys, inter, psi))
    return total


def el_residual(sys: DiscreteLagrangianSystem, psi: dict, v: int) -> np.ndarray:
    """Derivative of the action with respect to the value at ``v``."""
    if v not in sys._at_vertex:
        raise DomainError(f"vertex {v} not in the system")
    out = np.zeros(sys.chart_dims[v])
    for idx in sys._at_vertex[v]:
        inter = sys.interactions[idx]
        xs = _slot_values(sys, inter, psi)
        for slot, u in enumerate(inter.vertices):
            if u == v:
                out = out + inter.density.grad(xs, slot)
    return out


def dynamical_step(
    sys: DiscreteLagrangianSystem,
    psi: dict,
    v: int,
    unknown: int,
    *,
    x0=None,
    tol: float = 1e-10,
    maxiter: int = 50,
) -> np.ndarray:
    """Solve the stationarity equation at ``v`` for the value at
    ``unknown`` by Newton iteration.

    All other values in the neighborhood of ``v`` must be present in
    ``psi``.  Raises DegeneracyError when the cross Hessian at an
    iterate is singular and NonConvergenceError after ``maxiter``.
    """
    if unknown not in sys.neighborhood(v):
        raise DomainError(f"vertex {unknown} does not interact with {v}")
    work = dict(psi)
    x = (
        np.zeros(sys.chart_dims[unknown])
        if x0 is None
        else np.asarray(x0, dtype=float).reshape(-1)
    )
    for _ in range(maxiter):
        work[unknown] = x
        r = el_residual(sys, work, v)
        if np.linalg.norm(r) <= tol:
            return x
        jac = np.zeros((sys.chart_dims[v], sys.chart_dims[unknown]))
        for idx in sys._at_vertex[v]:
            inter = sys.interactions[idx]
            if unknown not in inter.vertices:
                continue
            xs = _slot_values(sys, inter, work)
            for sa, u in enumerate(inter.vertices):
                if u != v:
                    continue
                for sb, u2 in enumerate(inter.vertices):
                    if u2 == unknown:
                        jac = jac + inter.density.hess(xs, sa, sb)
        try:
            delta = np.linalg.solve(jac, r)
        except np.linalg.LinAlgError:
            raise DegeneracyError(
                f"cross Hessian between {v} and {unknown} is singular"
            ) from None
        x = x - delta
    work[unknown] = x
    if np.linalg.norm(el_residual(sys, work, v)) <= tol:
        return x
    raise NonConvergenceError(
        f"no convergence at vertex {v} after {maxiter} iterations"
    )


@dataclass
class LinearizeResult:
    operator: DiscreteOperator
    max_el_residual: float
    warning: str | None
    uses_fd: bool


def linearize(
    sys: DiscreteLagrangianSystem,
    psi: dict,
    *,
    at=None,
    solution_tol: float = 1e-6,
    asym_tol: float = 1e-8,
) -> LinearizeResult:
    """Second variation of the action at ``psi`` as a block operator.

    Blocks are the summed mixed Hessians over shared interactions; the
    raw blocks must already be symmetric to within ``asym_tol`` (they
    are for any twice continuously differentiable density evaluated at
    one point), and are averaged to exact symmetry.  If psi fails the
    stationarity equations beyond ``solution_tol`` at the checked
    vertices, a warning string is attached (and emitted): the operator
    is still the Hessian, but conservation statements need a solution.

    ``at`` restricts both the block assembly and the residual check to
    interactions meeting the listed vertices (useful for truncations:
    pass the interior).
    """
    labels = sys.graph.vertex_labels if at is None else list(at)
    label_set = set(labels)
    if at is None:
        idxs = range(len(sys.interactions))
    else:
        idxs = sorted({i for v in labels for i in sys._at_vertex[v]})

    raw: dict[tuple[int, int], np.ndarray] = {}
    for i in idxs:
        inter = sys.interactions[i]
        xs = _slot_values(sys, inter, psi)
        for sa, u in enumerate(inter.vertices):
            for sb, u2 in enumerate(inter.vertices):
                h = inter.density.hess(xs, sa, sb)
                key = (u, u2)
                raw[key] = raw.get(key, 0) + h

    scale = max((np.max(np.abs(m)) for m in raw.values()), default=1.0)
    blocks = {}
    for (u, u2), m in raw.items():
        partner = raw.get((u2, u))
        if partner is None:
            raise DomainError(f"hessian block ({u2}, {u}) missing")
        gap = np.max(np.abs(m - partner.T))
        if gap > asym_tol * max(1.0, scale):
            raise DomainError(
                f"hessian blocks at ({u}, {u2}) break symmetry by {gap:.3e}"
            )
        sym = 0.5 * (m + partner.T)
        blocks[(sys.graph.vertex_sid(u), sys.graph.vertex_sid(u2))] = sym

    residual = 0.0
    for v in labels:
        if all(u in psi for u in sys.neighborhood(v)):
            residual = max(residual, float(np.max(np.abs(el_residual(sys, psi, v)))))
    warning = None
    if residual > solution_tol:
        warning = (
            f"configuration misses stationarity by {residual:.3e}; "
            "linearization is a plain Hessian, not a conserved-form operator"
        )
        warnings.warn(warning)
    op = DiscreteOperator(sys.graph, _uniform_dim(sys), blocks)
    return LinearizeResult(
        operator=op,
        max_el_residual=residual,
        warning=warning,
        uses_fd=sys.uses_fd(),
    )


def _uniform_dim(sys: DiscreteLagrangianSystem) -> int:
    dims = set(sys.chart_dims.values())
    if len(dims) != 1:
        raise DomainError("mixed chart dimensions are not supported here")
    return dims.pop()


def variational_swronskian(
    sys: DiscreteLagrangianSystem,
    psi: dict,
    delta1: dict,
    delta2: dict,
    *,
    at=None,
    kernel_tol: float = 1e-8,
) -> SWronskianChain:
    """Pair chain of two kernel variations of the linearized operator.

    Both variations must satisfy the linearized equations (at the
    checked vertices) to within ``kernel_tol`` relative to the block
    scale; otherwise the request is rejected, since the conservation law
    is what the chain is for.
    """
    lin = linearize(sys, psi, at=at)
    op = lin.operator
    support = set(op.complex.vertex_sid(v) for v in (at or sys.graph.vertex_labels))
    scale = max(
        (np.max(np.abs(m)) for m in op.blocks.values()), default=1.0
    )
    for name, dvec in (("delta1", delta1), ("delta2", delta2)):
        vals = {op.complex.vertex_sid(v): np.asarray(x, dtype=float).reshape(-1)
                for v, x in dvec.items()}
        check = [
            sid for sid in support
            if all(b in vals for b in op.stencil(sid))
        ]
        img = op.apply(vals, at=check)
        worst = max((np.max(np.abs(x)) for x in img.values()), default=0.0)
        if worst > kernel_tol * max(1.0, scale):
            raise DomainError(
                f"{name} is not a kernel variation (residual {worst:.3e})"
            )
    d1 = {op.complex.vertex_sid(v): x for v, x in delta1.items()}
    d2 = {op.complex.vertex_sid(v): x for v, x in delta2.items()}
    return swronskian(op, 0.0, d1, d2, support=sorted(support))


def build_translation_invariant(
    graph: SimplicialComplex, density: Density, chart_dim: int = 1, *, allow_ends=False
) -> DiscreteLagrangianSystem:
    """One copy of a two-slot density per edge, slots in vertex order."""
    if density.nvars != 2:
        raise DomainError("edge interactions need a two-slot density")
    inters = []
    for eid in graph.edge_sids:
        u, v = graph.simplex(eid).vertices
        inters.append(((u, v), density))
    return DiscreteLagrangianSystem(
        graph, inters, chart_dim, allow_ends=allow_ends
    )


def build_homogeneous_order4(
    graph: SimplicialComplex, density: Density, chart_dim: int = 1, *, allow_ends=False
) -> DiscreteLagrangianSystem:
    """One interaction per closed vertex neighborhood on a regular graph.

    Slot 0 is the center; the m neighbors follow in label order, so the
    density must take m + 1 slots where m is the common degree.
    """
    degrees = {v: len(graph._skeleton[v]) for v in graph.vertex_labels}
    if len(set(degrees.values())) != 1:
        raise DomainError("graph is not regular; closed neighborhoods vary")
    m = next(iter(degrees.values()))
    if density.nvars != m + 1:
        raise DomainError(
            f"degree-{m} neighborhoods need {m + 1} slots, density has "
            f"{density.nvars}"
        )
    inters = []
    for v in graph.vertex_labels:
        nbrs = sorted(w for _, w in graph._skeleton[v])
        inters.append(((v, *nbrs), density))
    return DiscreteLagrangianSystem(graph, inters, chart_dim, allow_ends=allow_ends)
