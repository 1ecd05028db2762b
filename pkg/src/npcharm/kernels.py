"""Array backends for grid-valued sections.

The cylinder solver stores a whole grid of target-space points as raw
coordinate arrays and needs distance / interpolation / weighted-mean
updates over many nodes at once.  Each space gets a small kernel class
with vectorized (or, for trees, looped) operations on those raw stacks.

Raw layouts: Euclidean -> float (..., dim); H2 -> complex (...);
SPD(n) -> float (..., n, n); tree -> (int edge ids (...), float offsets (...)).
"""

import numpy as np

from . import spd
from .errors import UnsupportedSpace
from .spaces import (
    Euclidean,
    EuclideanPoint,
    H2Point,
    Hyperbolic2,
    MetricTree,
    SpdManifold,
    h2_exp0,
    h2_log0,
    h2_translate,
    h2_untranslate,
)
from .spd import SpdPoint
from .tree import TreePoint


class EuclideanKernel:
    def __init__(self, space):
        self.space = space

    def stack(self, points):
        return np.array([p.coords for p in points], dtype=float)

    def empty(self, shape):
        return np.zeros(shape + (self.space.dim,))

    def to_point(self, raw):
        return EuclideanPoint(np.array(raw, dtype=float))

    def dist2(self, A, B):
        return np.sum((A - B) ** 2, axis=-1)

    def dist(self, A, B):
        return np.sqrt(self.dist2(A, B))

    def interp(self, A, B, t):
        t = np.asarray(t)[..., None]
        return (1.0 - t) * A + t * B

    def weighted_mean(self, nbrs, weights, init=None, iters=0):
        w = np.asarray(weights, dtype=float)
        w = w / w.sum()
        return sum(wi * N for wi, N in zip(w, nbrs))


class H2Kernel:
    def __init__(self, space):
        self.space = space

    def stack(self, points):
        return np.array([p.z for p in points], dtype=complex)

    def empty(self, shape):
        return np.zeros(shape, dtype=complex)

    def to_point(self, raw):
        return H2Point(complex(raw))

    def dist(self, A, B):
        r = np.abs(A - B) / np.abs(1.0 - np.conj(A) * B)
        return 2.0 * np.arctanh(np.minimum(r, 1.0 - 1e-16))

    def dist2(self, A, B):
        return self.dist(A, B) ** 2

    def interp(self, A, B, t):
        W = (B - A) / (1.0 - np.conj(A) * B)
        r = np.abs(W)
        D = 2.0 * np.arctanh(np.minimum(r, 1.0 - 1e-16))
        rt = np.tanh(0.5 * np.asarray(t) * D)
        safe = np.where(r < 1e-18, 1.0, r)
        Z = rt * W / safe
        return (Z + A) / (1.0 + np.conj(A) * Z)

    def log(self, A, B):
        W = (B - A) / (1.0 - np.conj(A) * B)
        r = np.abs(W)
        safe = np.where(r < 1e-18, 1.0, r)
        return 2.0 * np.arctanh(np.minimum(r, 1.0 - 1e-16)) * W / safe

    def exp(self, A, V):
        s = np.abs(V)
        safe = np.where(s < 1e-18, 1.0, s)
        Z = np.tanh(0.5 * s) * V / safe
        return (Z + A) / (1.0 + np.conj(A) * Z)

    def weighted_mean(self, nbrs, weights, init=None, iters=3):
        w = np.asarray(weights, dtype=float)
        w = w / w.sum()
        x = nbrs[0] if init is None else init
        for _ in range(iters):
            g = sum(wi * self.log(x, N) for wi, N in zip(w, nbrs))
            x = self.exp(x, g)
        return x


class SpdKernel:
    def __init__(self, space):
        self.space = space
        self.n = space.n
        self.fast = space.n == 2

    def stack(self, points):
        return np.array([p.matrix for p in points], dtype=float)

    def empty(self, shape):
        out = np.zeros(shape + (self.n, self.n))
        out[...] = np.eye(self.n)
        return out

    def to_point(self, raw):
        return SpdPoint(np.array(raw, dtype=float))

    def _loop(self, fn, *stacks):
        lead = stacks[0].shape[:-2]
        flat = [s.reshape((-1,) + s.shape[-2:]) for s in stacks]
        out = np.array([fn(*(f[i] for f in flat)) for i in range(flat[0].shape[0])])
        return out.reshape(lead + out.shape[1:])

    def dist2(self, A, B):
        if self.fast:
            return spd.dist2_sq(A, B)
        return self._loop(lambda a, b: spd.spd_distance(a, b) ** 2, A, B)

    def dist(self, A, B):
        return np.sqrt(np.maximum(self.dist2(A, B), 0.0))

    def interp(self, A, B, t):
        if self.fast:
            return spd.interp2(A, B, t)
        t = np.broadcast_to(np.asarray(t, dtype=float), A.shape[:-2])
        flatT = t.reshape(-1)
        flatA = A.reshape((-1, self.n, self.n))
        flatB = B.reshape((-1, self.n, self.n))
        out = np.array(
            [
                spd.spd_interp(flatA[i], flatB[i], float(flatT[i])).matrix
                for i in range(flatA.shape[0])
            ]
        )
        return out.reshape(A.shape)

    def log(self, A, B):
        if self.fast:
            return spd.log2_map(A, B)
        return self._loop(lambda a, b: spd.spd_log(SpdPoint(a), SpdPoint(b)).matrix, A, B)

    def exp(self, A, V):
        if self.fast:
            return spd.exp2_map(A, V)
        return self._loop(lambda a, v: spd.spd_exp(SpdPoint(a), v, 1.0).matrix, A, V)

    def weighted_mean(self, nbrs, weights, init=None, iters=3):
        w = np.asarray(weights, dtype=float)
        w = w / w.sum()
        x = nbrs[0] if init is None else init
        for _ in range(iters):
            g = sum(wi * self.log(x, N) for wi, N in zip(w, nbrs))
            x = self.exp(x, g)
        return x


class TreeKernel:
    """Looped backend; raw stacks are (edge id array, offset array)."""

    def __init__(self, space):
        self.space = space

    def stack(self, points):
        return (
            np.array([p.edge for p in points], dtype=int),
            np.array([p.offset for p in points], dtype=float),
        )

    def empty(self, shape):
        return (np.zeros(shape, dtype=int), np.zeros(shape, dtype=float))

    def to_point(self, raw):
        e, o = raw
        return self.space.point(int(e), float(o))

    def _pts(self, A):
        e, o = A
        return e.ravel(), o.ravel(), e.shape

    def dist(self, A, B):
        ea, oa, shape = self._pts(A)
        eb, ob, _ = self._pts(B)
        out = np.array(
            [
                self.space.distance(TreePoint(int(ea[i]), float(oa[i])),
                                    TreePoint(int(eb[i]), float(ob[i])))
                for i in range(len(ea))
            ]
        )
        return out.reshape(shape)

    def dist2(self, A, B):
        return self.dist(A, B) ** 2

    def interp(self, A, B, t):
        ea, oa, shape = self._pts(A)
        eb, ob, _ = self._pts(B)
        ts = np.broadcast_to(np.asarray(t, dtype=float), shape).ravel()
        es = np.empty(len(ea), dtype=int)
        os_ = np.empty(len(ea), dtype=float)
        for i in range(len(ea)):
            p = self.space.interp(
                TreePoint(int(ea[i]), float(oa[i])),
                TreePoint(int(eb[i]), float(ob[i])),
                float(ts[i]),
            )
            es[i], os_[i] = p.edge, p.offset
        return (es.reshape(shape), os_.reshape(shape))

    def weighted_mean(self, nbrs, weights, init=None, iters=0):
        w = list(weights)
        ea, oa, shape = self._pts(nbrs[0])
        stacks = [self._pts(N)[:2] for N in nbrs]
        es = np.empty(len(ea), dtype=int)
        os_ = np.empty(len(ea), dtype=float)
        for i in range(len(ea)):
            pts = [TreePoint(int(e[i]), float(o[i])) for (e, o) in stacks]
            b = self.space.barycenter(pts, np.asarray(w) / np.sum(w), tol=1e-10)
            es[i], os_[i] = b.edge, b.offset
        return (es.reshape(shape), os_.reshape(shape))


def kernel_for(space):
    if isinstance(space, Euclidean):
        return EuclideanKernel(space)
    if isinstance(space, Hyperbolic2):
        return H2Kernel(space)
    if isinstance(space, SpdManifold):
        return SpdKernel(space)
    if isinstance(space, MetricTree):
        return TreeKernel(space)
    raise UnsupportedSpace(f"unknown space {space!r}")


def raw_copy(raw):
    if isinstance(raw, tuple):
        return (raw[0].copy(), raw[1].copy())
    return raw.copy()


def raw_take_rows(raw, sl):
    if isinstance(raw, tuple):
        return (raw[0][sl], raw[1][sl])
    return raw[sl]


def raw_set_rows(raw, sl, value):
    if isinstance(raw, tuple):
        raw[0][sl] = value[0]
        raw[1][sl] = value[1]
    else:
        raw[sl] = value


def raw_where(mask, a, b):
    if isinstance(a, tuple):
        return (np.where(mask, a[0], b[0]), np.where(mask, a[1], b[1]))
    m = mask
    while m.ndim < a.ndim:
        m = m[..., None]
    return np.where(m, a, b)
