"""Finite metric trees: path metric, geodesic interpolation, barycenters.

A tree is a connected acyclic graph with positive edge lengths.  Points
live on edges as (edge id, offset); points sitting on a vertex are
canonicalized to (lowest incident edge id, offset 0 or full length) so
that equality is testable.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidPoint

_SNAP = 1e-12


@dataclass(frozen=True)
class TreePoint:
    edge: int
    offset: float


class MetricTree:
    """Vertices are arbitrary hashable ids; edges are (u, v, length)."""

    def __init__(self, vertices, edges):
        self.vertices = list(vertices)
        self.edges = [(u, v, float(length)) for (u, v, length) in edges]
        vset = set(self.vertices)
        if len(vset) != len(self.vertices):
            raise DomainError("duplicate vertex ids")
        for u, v, length in self.edges:
            if u not in vset or v not in vset:
                raise DomainError(f"edge ({u},{v}) references unknown vertex")
            if length <= 0:
                raise DomainError(f"edge ({u},{v}) has non-positive length {length}")
        if len(self.edges) != len(self.vertices) - 1 and self.vertices:
            raise DomainError("edge count must be |V|-1 for a tree")
        self._adj = {v: [] for v in self.vertices}
        for idx, (u, v, length) in enumerate(self.edges):
            self._adj[u].append((v, idx, length))
            self._adj[v].append((u, idx, length))
        self._check_connected()
        self._vdist, self._next_hop = self._all_pairs()

    def _check_connected(self):
        if not self.vertices:
            raise DomainError("tree must have at least one vertex")
        seen = {self.vertices[0]}
        stack = [self.vertices[0]]
        while stack:
            v = stack.pop()
            for w, _, _ in self._adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if len(seen) != len(self.vertices):
            raise DomainError("tree graph is not connected")

    def _all_pairs(self):
        dist = {}
        nxt = {}
        for root in self.vertices:
            dist[root] = {root: 0.0}
            nxt[root] = {root: root}
            stack = [root]
            while stack:
                v = stack.pop()
                for w, _, length in self._adj[v]:
                    if w not in dist[root]:
                        dist[root][w] = dist[root][v] + length
                        nxt[root][w] = w if v == root else nxt[root][v]
                        stack.append(w)
        return dist, nxt

    # -- points ------------------------------------------------------------
    def degree(self, v):
        return len(self._adj[v])

    def edge_length(self, e):
        return self.edges[e][2]

    def point(self, edge, offset):
        if not (0 <= edge < len(self.edges)):
            raise InvalidPoint(f"edge id {edge} out of range")
        length = self.edges[edge][2]
        if not (-_SNAP <= offset <= length + _SNAP):
            raise InvalidPoint(f"offset {offset} outside edge of length {length}")
        return self.canonical(TreePoint(int(edge), float(min(max(offset, 0.0), length))))

    def vertex_point(self, v):
        """Canonical representative of a vertex."""
        if not self._adj[v]:
            raise InvalidPoint(f"vertex {v} has no incident edge")
        _, idx, _ = min(self._adj[v], key=lambda t: t[1])
        u0, v0, length = self.edges[idx]
        return TreePoint(idx, 0.0 if u0 == v else length)

    def canonical(self, p):
        u, v, length = self.edges[p.edge]
        if p.offset <= _SNAP:
            return self.vertex_point(u)
        if p.offset >= length - _SNAP:
            return self.vertex_point(v)
        return p

    def vertex_of(self, p):
        """Vertex id if p sits on a vertex, else None."""
        u, v, length = self.edges[p.edge]
        if p.offset <= _SNAP:
            return u
        if p.offset >= length - _SNAP:
            return v
        return None

    def random_point(self, rng):
        if not self.edges:
            raise DomainError("tree has no edges to sample points from")
        # weight edges by length so sampling is uniform along the tree
        lengths = np.array([e[2] for e in self.edges])
        idx = int(rng.choice(len(self.edges), p=lengths / lengths.sum()))
        return self.point(idx, float(rng.random() * lengths[idx]))

    # -- metric ------------------------------------------------------------
    def distance(self, p, q):
        if p.edge == q.edge:
            return abs(p.offset - q.offset)
        return self._route(p, q)[0]

    def _route(self, p, q):
        """(distance, exit vertex of p's edge, entry vertex of q's edge)."""
        up, vp, lp = self.edges[p.edge]
        uq, vq, lq = self.edges[q.edge]
        best = None
        for a, da in ((up, p.offset), (vp, lp - p.offset)):
            for b, db in ((uq, q.offset), (vq, lq - q.offset)):
                d = da + self._vdist[a][b] + db
                if best is None or d < best[0] - 1e-15:
                    best = (d, a, b)
        return best

    def interp(self, p, q, t):
        """Point at arclength t*d(p,q) along the geodesic from p to q."""
        if p.edge == q.edge:
            off = p.offset + t * (q.offset - p.offset)
            return self.point(p.edge, off)
        d, a, b = self._route(p, q)
        s = t * d
        up, vp, lp = self.edges[p.edge]
        da = p.offset if a == up else lp - p.offset
        if s <= da:
            off = p.offset - s if a == up else p.offset + s
            return self.point(p.edge, off)
        s -= da
        # walk vertex chain from a toward b
        v = a
        while v != b:
            w = self._next_hop[v][b]
            idx, length = self._edge_between(v, w)
            if s <= length:
                off = s if self.edges[idx][0] == v else length - s
                return self.point(idx, off)
            s -= length
            v = w
        # remaining distance runs into q's edge
        uq, vq, lq = self.edges[q.edge]
        off = s if b == uq else lq - s
        return self.point(q.edge, off)

    def _edge_between(self, v, w):
        for x, idx, length in self._adj[v]:
            if x == w:
                return idx, length
        raise DomainError(f"no edge between {v} and {w}")

    def dist_to_vertex(self, p, v):
        u, w, length = self.edges[p.edge]
        return min(p.offset + self._vdist[u][v], (length - p.offset) + self._vdist[w][v])

    # -- barycenter --------------------------------------------------------
    def barycenter(self, points, weights, tol=1e-9):
        """Weighted Frechet mean: minimizer of sum w_i d^2(x, p_i).

        The objective is convex and piecewise quadratic along each edge,
        so a ternary search per edge followed by a global comparison is
        exact up to tol.
        """
        weights = np.asarray(weights, dtype=float)

        def cost(x):
            return float(sum(w * self.distance(x, p) ** 2 for w, p in zip(weights, points)))

        best = (np.inf, None)
        for idx, (_, _, length) in enumerate(self.edges):
            lo, hi = 0.0, length
            for _ in range(80):
                if hi - lo < tol / 4:
                    break
                m1 = lo + (hi - lo) / 3
                m2 = hi - (hi - lo) / 3
                if cost(TreePoint(idx, m1)) <= cost(TreePoint(idx, m2)):
                    hi = m2
                else:
                    lo = m1
            off = 0.5 * (lo + hi)
            c = cost(TreePoint(idx, off))
            if c < best[0] - 1e-15:
                best = (c, self.point(idx, off))
        return best[1]


def tree_from_json(doc):
    """Build a MetricTree from {"vertices": [...], "edges": [{from,to,length}]}"""
    try:
        vertices = doc["vertices"]
        edges = [(e["from"], e["to"], e["length"]) for e in doc["edges"]]
    except (KeyError, TypeError) as exc:
        raise DomainError(f"malformed tree document: {exc}") from exc
    return MetricTree(vertices, edges)


def tree_to_json(tree):
    return {
        "vertices": list(tree.vertices),
        "edges": [{"from": u, "to": v, "length": length} for (u, v, length) in tree.edges],
    }
