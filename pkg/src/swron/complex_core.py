"""Combinatorial substrate: simplicial complexes, distances, paths, 1-chains.

Conventions used throughout the package:

* A simplex is a strictly increasing tuple of integer vertex labels; the
  complex is closed under taking nonempty subsets (faces).
* Simplex ids are assigned by sorting all simplices by (dimension, vertex
  tuple).  They are therefore stable: rebuilding the same complex yields
  the same ids.  Edge ids are simply the ids of the 1-simplices.
* Two distinct simplices are *incident* when one is a proper face of the
  other, of any codimension.  Each incidence counts 1/2 towards the
  distance, so ``distance(a, b)`` is half the length of the shortest
  incidence chain and takes values in {0, 1/2, 1, 3/2, ...}.
* Every edge (u, v) with u < v carries the reference orientation u -> v;
  1-chain coefficients are stated with respect to it.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

__all__ = [
    "DomainError",
    "Simplex",
    "SimplicialComplex",
    "PathChain",
    "Chain1",
    "canonical_path",
    "barycentric_subdivision",
    "boundary",
    "complex_to_json",
    "complex_from_json",
]


class DomainError(ValueError):
    """An input lies outside the domain of the requested operation."""


@dataclass(frozen=True)
class Simplex:
    """A single simplex: stable id plus its ordered vertex tuple."""

    id: int
    vertices: tuple[int, ...]
    orientation: int = 1

    @property
    def dim(self) -> int:
        return len(self.vertices) - 1

    def __repr__(self) -> str:  # compact, used in error messages
        return f"Simplex({self.id}, {self.vertices})"


def _normalize_simplex(vertices) -> tuple[int, ...]:
    vs = tuple(int(v) for v in vertices)
    if len(vs) == 0:
        raise DomainError("empty vertex tuple is not a simplex")
    if len(set(vs)) != len(vs):
        raise DomainError(f"repeated vertex in simplex {vs}")
    if any(v < 0 for v in vs):
        raise DomainError(f"vertex labels must be non-negative: {vs}")
    return tuple(sorted(vs))


class SimplicialComplex:
    """A finite simplicial complex, closed under faces at construction.

    Parameters
    ----------
    simplices : iterable of vertex iterables
        Generating simplices; all faces are added automatically.
    tails : list or None
        Optional periodic-tail generators carried through serialization
        (see :func:`materialize_tails`); they do not affect the finite
        complex itself.
    """

    def __init__(self, simplices, *, tails=None):
        closure: set[tuple[int, ...]] = set()
        for vs in simplices:
            top = _normalize_simplex(vs)
            for r in range(1, len(top) + 1):
                closure.update(combinations(top, r))
        ordered = sorted(closure, key=lambda t: (len(t), t))
        self.simplices: list[Simplex] = [
            Simplex(i, vs) for i, vs in enumerate(ordered)
        ]
        self._id_of: dict[tuple[int, ...], int] = {
            s.vertices: s.id for s in self.simplices
        }
        self.tails = list(tails) if tails else []

        # vertex label -> id of its 0-simplex
        self._vertex_sid: dict[int, int] = {
            s.vertices[0]: s.id for s in self.simplices if s.dim == 0
        }
        # (u, v) sorted -> edge id
        self._edge_sid: dict[tuple[int, int], int] = {
            s.vertices: s.id for s in self.simplices if s.dim == 1
        }

        # incidence adjacency: proper faces (all codims) and their inverses
        n = len(self.simplices)
        self._faces_all: list[list[int]] = [[] for _ in range(n)]
        self._cofaces_all: list[list[int]] = [[] for _ in range(n)]
        for s in self.simplices:
            if s.dim == 0:
                continue
            for r in range(1, len(s.vertices)):
                for sub in combinations(s.vertices, r):
                    fid = self._id_of[sub]
                    self._faces_all[s.id].append(fid)
                    self._cofaces_all[fid].append(s.id)
        self._incidence: list[list[int]] = [
            sorted(self._faces_all[i] + self._cofaces_all[i]) for i in range(n)
        ]

        # 1-skeleton adjacency: vertex label -> [(edge id, other label)],
        # sorted by edge id so greedy path selection is a plain scan.
        self._skeleton: dict[int, list[tuple[int, int]]] = {
            v: [] for v in self._vertex_sid
        }
        for (u, v), eid in self._edge_sid.items():
            self._skeleton[u].append((eid, v))
            self._skeleton[v].append((eid, u))
        for v in self._skeleton:
            self._skeleton[v].sort()

        self._path_cache: dict[tuple[int, int], "PathChain"] = {}
        self._girth: int | None = None

    # -- basic queries ---------------------------------------------------

    def __len__(self) -> int:
        return len(self.simplices)

    def __iter__(self):
        return iter(self.simplices)

    def simplex(self, sid: int) -> Simplex:
        try:
            return self.simplices[sid]
        except IndexError:
            raise DomainError(f"no simplex with id {sid}") from None

    def id_of(self, vertices) -> int:
        key = _normalize_simplex(vertices)
        try:
            return self._id_of[key]
        except KeyError:
            raise DomainError(f"simplex {key} not in complex") from None

    def has_simplex(self, vertices) -> bool:
        return _normalize_simplex(vertices) in self._id_of

    def vertex_sid(self, label: int) -> int:
        try:
            return self._vertex_sid[label]
        except KeyError:
            raise DomainError(f"vertex {label} not in complex") from None

    def edge_sid(self, u: int, v: int) -> int:
        key = (u, v) if u < v else (v, u)
        try:
            return self._edge_sid[key]
        except KeyError:
            raise DomainError(f"edge {key} not in complex") from None

    @property
    def vertex_labels(self) -> list[int]:
        return sorted(self._vertex_sid)

    @property
    def edge_sids(self) -> list[int]:
        return sorted(self._edge_sid.values())

    @property
    def dim(self) -> int:
        return max(s.dim for s in self.simplices)

    def simplices_of_dim(self, k: int) -> list[Simplex]:
        return [s for s in self.simplices if s.dim == k]

    def f_vector(self) -> tuple[int, ...]:
        counts = [0] * (self.dim + 1)
        for s in self.simplices:
            counts[s.dim] += 1
        return tuple(counts)

    def euler_characteristic(self) -> int:
        return sum((-1) ** k * f for k, f in enumerate(self.f_vector()))

    def local_finiteness_bound(self) -> int:
        """Largest number of simplices properly containing any one simplex."""
        return max((len(c) for c in self._cofaces_all), default=0)

    # -- incidence structure ----------------------------------------------

    def faces(self, sid: int) -> list[tuple[int, int]]:
        """Codimension-1 faces of ``sid`` with incidence signs (-1)**i."""
        s = self.simplex(sid)
        out = []
        for i in range(len(s.vertices)):
            sub = s.vertices[:i] + s.vertices[i + 1 :]
            if sub:
                out.append((self._id_of[sub], (-1) ** i))
        return out

    def cofaces(self, sid: int) -> list[int]:
        """Ids of all simplices properly containing ``sid`` (any codim)."""
        return list(self._cofaces_all[sid])

    def proper_faces(self, sid: int) -> list[int]:
        return list(self._faces_all[sid])

    def incident(self, sid: int) -> list[int]:
        """All simplices at distance exactly 1/2 from ``sid``."""
        return list(self._incidence[sid])

    def boundary_matrix(self, k: int) -> np.ndarray:
        """Signed incidence matrix C_k -> C_{k-1} (dense integer array)."""
        rows = self.simplices_of_dim(k - 1)
        cols = self.simplices_of_dim(k)
        row_pos = {s.id: i for i, s in enumerate(rows)}
        mat = np.zeros((len(rows), len(cols)), dtype=np.int64)
        for j, s in enumerate(cols):
            for fid, sign in self.faces(s.id):
                mat[row_pos[fid], j] = sign
        return mat

    # -- metric -----------------------------------------------------------

    def steps_within(self, sid: int, max_steps: int) -> dict[int, int]:
        """Incidence-BFS ball: simplex id -> step count, up to max_steps."""
        seen = {sid: 0}
        frontier = deque([sid])
        while frontier:
            cur = frontier.popleft()
            d = seen[cur]
            if d == max_steps:
                continue
            for nxt in self._incidence[cur]:
                if nxt not in seen:
                    seen[nxt] = d + 1
                    frontier.append(nxt)
        return seen

    def distance(self, a, b) -> float:
        """Half the shortest incidence-chain length; inf if disconnected."""
        sa = a.id if isinstance(a, Simplex) else int(a)
        sb = b.id if isinstance(b, Simplex) else int(b)
        self.simplex(sa), self.simplex(sb)
        if sa == sb:
            return 0.0
        seen = {sa: 0}
        frontier = deque([sa])
        while frontier:
            cur = frontier.popleft()
            for nxt in self._incidence[cur]:
                if nxt == sb:
                    return (seen[cur] + 1) / 2.0
                if nxt not in seen:
                    seen[nxt] = seen[cur] + 1
                    frontier.append(nxt)
        return math.inf

    def girth(self) -> float:
        """Shortest 1-cycle length in edges; inf for a forest 1-skeleton."""
        if self._girth is not None:
            return self._girth
        best = math.inf
        for src in self._vertex_sid:
            dist = {src: 0}
            parent_edge = {src: -1}
            frontier = deque([src])
            while frontier:
                u = frontier.popleft()
                for eid, w in self._skeleton[u]:
                    if eid == parent_edge[u]:
                        continue
                    if w in dist:
                        best = min(best, dist[u] + dist[w] + 1)
                    else:
                        dist[w] = dist[u] + 1
                        parent_edge[w] = eid
                        frontier.append(w)
        self._girth = best
        return best

    def connected(self) -> bool:
        if not self.simplices:
            return True
        seen = self.steps_within(0, len(self.simplices))
        return len(seen) == len(self.simplices)


@dataclass
class PathChain:
    """A simplicial path along edges, stored as oriented edge steps.

    ``steps`` holds (edge id, sign): sign +1 when the step traverses the
    edge in its reference (low -> high vertex label) orientation.
    """

    complex: SimplicialComplex
    start: int
    end: int
    steps: list[tuple[int, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    def reversed(self) -> "PathChain":
        rev = [(eid, -sign) for eid, sign in reversed(self.steps)]
        return PathChain(self.complex, self.end, self.start, rev)

    def vertex_sequence(self) -> list[int]:
        seq = [self.start]
        cur = self.start
        for eid, sign in self.steps:
            u, v = self.complex.simplex(eid).vertices
            cur = v if (cur == u) else u
            seq.append(cur)
        return seq

    def to_chain(self) -> "Chain1":
        c = Chain1(self.complex)
        for eid, sign in self.steps:
            c.add(eid, sign)
        return c


class Chain1:
    """A 1-chain: complex reference plus edge-id -> complex coefficient."""

    def __init__(self, complex: SimplicialComplex, coeffs=None):
        self.complex = complex
        self.coeffs: dict[int, complex] = dict(coeffs) if coeffs else {}

    def add(self, edge_sid: int, value) -> None:
        if self.complex.simplex(edge_sid).dim != 1:
            raise DomainError(f"simplex {edge_sid} is not an edge")
        self.coeffs[edge_sid] = self.coeffs.get(edge_sid, 0) + value

    def add_chain(self, other: "Chain1", scale=1) -> None:
        for eid, c in other.coeffs.items():
            self.add(eid, scale * c)

    def scaled(self, factor) -> "Chain1":
        return Chain1(self.complex, {e: factor * c for e, c in self.coeffs.items()})

    def __add__(self, other: "Chain1") -> "Chain1":
        out = Chain1(self.complex, self.coeffs)
        out.add_chain(other)
        return out

    def max_abs(self) -> float:
        return max((abs(c) for c in self.coeffs.values()), default=0.0)

    def cleaned(self, tol: float) -> "Chain1":
        return Chain1(
            self.complex, {e: c for e, c in self.coeffs.items() if abs(c) > tol}
        )

    def boundary(self) -> dict[int, complex]:
        """0-chain of the boundary, keyed by vertex label."""
        out: dict[int, complex] = {}
        for eid, c in self.coeffs.items():
            u, v = self.complex.simplex(eid).vertices
            out[v] = out.get(v, 0) + c
            out[u] = out.get(u, 0) - c
        return out

    def to_json_dict(self) -> dict:
        return {
            "edges": {
                str(e): [float(np.real(c)), float(np.imag(c))]
                for e, c in sorted(self.coeffs.items())
            }
        }


def boundary(chain: Chain1) -> dict[int, complex]:
    """Functional form of :meth:`Chain1.boundary`."""
    return chain.boundary()


def canonical_path(complex: SimplicialComplex, a: int, b: int) -> PathChain:
    """Deterministic minimal edge path between vertices ``a`` and ``b``.

    Among all minimal paths the one with the lexicographically least
    edge-id sequence is returned (BFS distances from ``b``, then greedy
    smallest-edge-id descent).  The choice is unique without the
    tie-break whenever 2*d(a, b) is smaller than the girth in edges.
    """
    complex.vertex_sid(a), complex.vertex_sid(b)
    key = (a, b)
    hit = complex._path_cache.get(key)
    if hit is not None:
        return hit
    if a == b:
        path = PathChain(complex, a, b, [])
        complex._path_cache[key] = path
        return path

    dist = {b: 0}
    frontier = deque([b])
    while frontier:
        u = frontier.popleft()
        for eid, w in complex._skeleton[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                frontier.append(w)
    if a not in dist:
        raise DomainError(f"vertices {a} and {b} lie in different components")

    steps: list[tuple[int, int]] = []
    cur = a
    while cur != b:
        for eid, w in complex._skeleton[cur]:  # sorted by edge id
            if dist.get(w, -1) == dist[cur] - 1:
                u, v = complex.simplex(eid).vertices
                steps.append((eid, 1 if cur == u else -1))
                cur = w
                break
    path = PathChain(complex, a, b, steps)
    complex._path_cache[key] = path
    return path


def barycentric_subdivision(
    complex: SimplicialComplex,
) -> tuple[SimplicialComplex, dict[int, int]]:
    """Order complex of the face poset, with centers labeled by simplex id.

    Returns (K', center_map) where center_map sends each simplex id of K
    to the vertex label of its center in K'.  Every strictly increasing
    chain of faces becomes a simplex of K'; in particular the 1-skeleton
    of K' is exactly the incidence graph of K, so graph distance between
    centers in K' equals twice the simplex distance in K.
    """
    chains: list[tuple[int, ...]] = []

    def grow(prefix: list[int], top: int) -> None:
        prefix = prefix + [top]
        chains.append(tuple(prefix))
        for nxt in complex._cofaces_all[top]:
            grow(prefix, nxt)

    for s in complex.simplices:
        if s.dim == 0:
            grow([], s.id)
    # simplices that contain no vertex cannot occur; every chain starts at
    # a 0-simplex and extends upward, so all chains are enumerated once.
    sub = SimplicialComplex(chains)
    center_map = {s.id: s.id for s in complex.simplices}
    return sub, center_map


# -- serialization ---------------------------------------------------------


def complex_to_json(complex: SimplicialComplex) -> dict:
    maximal = [
        list(s.vertices)
        for s in complex.simplices
        if not complex._cofaces_all[s.id]
    ]
    data = {
        "vertices": complex.vertex_labels,
        "simplices": maximal,
    }
    if complex.tails:
        data["tails"] = complex.tails
    return data


def complex_from_json(data: dict) -> SimplicialComplex:
    if "simplices" not in data:
        raise DomainError("complex JSON must contain a 'simplices' list")
    gens = [tuple(s) for s in data["simplices"]]
    declared = set(int(v) for v in data.get("vertices", []))
    for vs in gens:
        for v in vs:
            if declared and int(v) not in declared:
                raise DomainError(f"simplex {vs} uses undeclared vertex {v}")
    for v in sorted(declared):
        gens.append((int(v),))
    return SimplicialComplex(gens, tails=data.get("tails"))


def load_complex(path: str) -> SimplicialComplex:
    with open(path) as fh:
        return complex_from_json(json.load(fh))


def save_complex(complex: SimplicialComplex, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(complex_to_json(complex), fh, indent=1, sort_keys=True)
        fh.write("\n")


def materialize_tails(
    complex: SimplicialComplex, depth: int
) -> tuple[SimplicialComplex, dict[tuple[int, int, int], int]]:
    """Attach ``depth`` periods of each tail generator as concrete edges.

    Tail generators follow the serialized form::

        {"orbits": m, "edges": [[a, b, w], ...], "attach": [[core_vertex, orbit], ...]}

    Vertices of tail j, orbit a, period n get fresh labels; the returned
    map sends (j, a, n) to the new label.
    """
    if depth < 1:
        raise DomainError("tail depth must be at least 1")
    gens = [list(s.vertices) for s in complex.simplices]
    label = max(complex.vertex_labels, default=-1) + 1
    where: dict[tuple[int, int, int], int] = {}
    for j, tail in enumerate(complex.tails):
        m = int(tail["orbits"])
        for a in range(m):
            for n in range(depth):
                where[(j, a, n)] = label
                label += 1
        for a, b, w in tail.get("edges", []):
            for n in range(depth):
                if 0 <= n + w < depth:
                    gens.append([where[(j, a, n)], where[(j, b, n + w)]])
        for v, a in tail.get("attach", []):
            gens.append([int(v), where[(j, int(a), 0)]])
    return SimplicialComplex(gens), where
