"""Uniform metric-geometry interface over four concrete NPC spaces.

Supported spaces: Euclidean R^d, the hyperbolic plane in the Poincare
disk model, the SPD cone P(n) with its affine-invariant metric, and
finite metric trees.  Every space exposes distance and geodesic
interpolation; on top of those sit sampling checkers for the NPC and
CAT(-kappa) comparison inequalities and a barycenter routine.
"""

from dataclasses import dataclass

import numpy as np

from . import spd
from .errors import DomainError, InvalidPoint, UnsupportedSpace
from .rng import subrng
from .spd import SpdPoint
from .tree import MetricTree, TreePoint

H2_BOUNDARY_TOL = 1e-12


# -- space descriptors ------------------------------------------------------

@dataclass(frozen=True)
class Euclidean:
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise DomainError("Euclidean dimension must be positive")


@dataclass(frozen=True)
class Hyperbolic2:
    pass


@dataclass(frozen=True)
class SpdManifold:
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("SPD dimension must be >= 2")


# MetricTree doubles as its own descriptor.
SpaceDescriptor = Euclidean | Hyperbolic2 | SpdManifold | MetricTree


# -- points ------------------------------------------------------------------

@dataclass(frozen=True)
class EuclideanPoint:
    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=float).ravel())


@dataclass(frozen=True)
class H2Point:
    z: complex

    def __post_init__(self):
        z = complex(self.z)
        if abs(z) >= 1.0 - H2_BOUNDARY_TOL:
            raise InvalidPoint(f"|z| = {abs(z)} is not inside the unit disk")
        object.__setattr__(self, "z", z)


Point = EuclideanPoint | H2Point | SpdPoint | TreePoint


def validate_point(space, p):
    """Raise InvalidPoint unless p belongs to space."""
    if isinstance(space, Euclidean):
        if not isinstance(p, EuclideanPoint) or p.coords.shape != (space.dim,):
            raise InvalidPoint(f"expected EuclideanPoint of dim {space.dim}, got {p!r}")
    elif isinstance(space, Hyperbolic2):
        if not isinstance(p, H2Point):
            raise InvalidPoint(f"expected H2Point, got {p!r}")
    elif isinstance(space, SpdManifold):
        if not isinstance(p, SpdPoint) or p.n != space.n:
            raise InvalidPoint(f"expected SpdPoint of size {space.n}, got {p!r}")
    elif isinstance(space, MetricTree):
        if not isinstance(p, TreePoint) or not (0 <= p.edge < len(space.edges)):
            raise InvalidPoint(f"expected TreePoint on the given tree, got {p!r}")
    else:
        raise UnsupportedSpace(f"unknown space {space!r}")
    return p


# -- hyperbolic plane primitives ---------------------------------------------

def h2_dist(z, w):
    num = abs(z - w)
    den = abs(1.0 - np.conj(z) * w)
    r = min(num / den, 1.0 - 1e-16)
    return 2.0 * np.arctanh(r)


def h2_translate(p, z):
    """Mobius map sending p to 0, applied to z."""
    return (z - p) / (1.0 - np.conj(p) * z)


def h2_untranslate(p, z):
    return (z + p) / (1.0 + np.conj(p) * z)


def h2_interp(p, q, t):
    w = h2_translate(p, q)
    r = abs(w)
    if r < 1e-18:
        return p
    D = 2.0 * np.arctanh(min(r, 1.0 - 1e-16))
    rt = np.tanh(0.5 * t * D)
    return h2_untranslate(p, rt * w / r)


def h2_log0(z):
    """Tangent at 0 (as a complex number) pointing to z, |v| = d(0,z)."""
    r = abs(z)
    if r < 1e-18:
        return 0.0j
    return 2.0 * np.arctanh(min(r, 1.0 - 1e-16)) * z / r


def h2_exp0(v):
    s = abs(v)
    if s < 1e-18:
        return 0.0j
    return np.tanh(0.5 * s) * v / s


# -- distance / interpolation dispatch ----------------------------------------

def distance(space, p, q):
    """Geodesic distance; symmetric, zero iff p = q up to representation."""
    validate_point(space, p)
    validate_point(space, q)
    if isinstance(space, Euclidean):
        return float(np.linalg.norm(p.coords - q.coords))
    if isinstance(space, Hyperbolic2):
        return float(h2_dist(p.z, q.z))
    if isinstance(space, SpdManifold):
        return spd.spd_distance(p, q)
    return space.distance(p, q)


def interp(space, p, q, t):
    """The point (1-t)p + tq on the geodesic from p to q."""
    if not (0.0 <= t <= 1.0):
        raise DomainError(f"interpolation parameter {t} outside [0,1]")
    validate_point(space, p)
    validate_point(space, q)
    if isinstance(space, Euclidean):
        return EuclideanPoint((1.0 - t) * p.coords + t * q.coords)
    if isinstance(space, Hyperbolic2):
        return H2Point(h2_interp(p.z, q.z, t))
    if isinstance(space, SpdManifold):
        return spd.spd_interp(p, q, t)
    return space.interp(p, q, t)


def random_point(space, rng, radius=2.0):
    """Quasi-uniform sample in a ball of the given radius."""
    if isinstance(space, Euclidean):
        v = rng.standard_normal(space.dim)
        n = np.linalg.norm(v)
        if n == 0:
            return EuclideanPoint(np.zeros(space.dim))
        return EuclideanPoint(v / n * radius * rng.random() ** (1.0 / space.dim))
    if isinstance(space, Hyperbolic2):
        d = radius * rng.random()
        th = 2.0 * np.pi * rng.random()
        return H2Point(np.tanh(0.5 * d) * np.exp(1j * th))
    if isinstance(space, SpdManifold):
        V = rng.standard_normal((space.n, space.n))
        V = 0.5 * (V + V.T)
        nrm = np.sqrt(np.trace(V @ V))
        if nrm > 0:
            V *= radius * rng.random() / nrm
        return spd.spd_exp(spd.identity(space.n), V, 1.0)
    if isinstance(space, MetricTree):
        return space.random_point(rng)
    raise UnsupportedSpace(f"unknown space {space!r}")


# -- comparison inequality checkers -------------------------------------------

@dataclass
class ComparisonReport:
    residual: float
    worst_case: tuple
    samples: int


def check_npc_inequality(space, samples, rng_seed=0):
    """Sample the defining comparison inequality of non-positive curvature.

    Draws (P, Q, R, t), forms Q_t by geodesic interpolation from Q to R
    and reports the minimum of
    (1-t) d^2(P,Q) + t d^2(P,R) - t(1-t) d^2(Q,R) - d^2(P,Q_t)
    over the samples; nonnegative (up to tolerance) certifies the kernel.
    """
    if samples < 1:
        raise DomainError("samples must be >= 1")
    best = (np.inf, None)
    done = 0
    for i in range(samples):
        rng = subrng(rng_seed, i)
        try:
            P, Q, R = (random_point(space, rng) for _ in range(3))
        except DomainError:
            break  # degenerate space (e.g. a one-vertex tree): no points
        t = float(rng.random())
        Qt = interp(space, Q, R, t)
        lhs = distance(space, P, Qt) ** 2
        rhs = (
            (1 - t) * distance(space, P, Q) ** 2
            + t * distance(space, P, R) ** 2
            - t * (1 - t) * distance(space, Q, R) ** 2
        )
        done += 1
        if rhs - lhs < best[0]:
            best = (rhs - lhs, (P, Q, R, t))
    if done == 0:
        return ComparisonReport(0.0, None, 0)
    return ComparisonReport(float(best[0]), best[1], done)


def check_cat_kappa(space, kappa, samples, rng_seed=0):
    """Sample the CAT(-kappa) comparison inequality in a ball of radius 2.

    Comparison with the model plane of curvature -kappa:
    cosh(sk d(P,Q_t)) sinh(sk l) <= sinh((1-t) sk l) cosh(sk d(P,Q))
                                    + sinh(t sk l) cosh(sk d(P,R)),
    where l = d(Q,R) and sk = sqrt(kappa).  Only spaces actually curved
    at or below -kappa are accepted.
    """
    if kappa <= 0:
        raise DomainError("kappa must be positive")
    if isinstance(space, (Euclidean, SpdManifold)):
        raise UnsupportedSpace(
            f"{type(space).__name__} contains flats and is not CAT(-kappa)"
        )
    if isinstance(space, Hyperbolic2) and kappa > 1.0 + 1e-12:
        raise DomainError("the hyperbolic plane has curvature -1; kappa must be <= 1")
    sk = np.sqrt(kappa)
    best = (np.inf, None)
    done = 0
    for i in range(samples):
        rng = subrng(rng_seed, i)
        try:
            P, Q, R = (random_point(space, rng, radius=2.0) for _ in range(3))
        except DomainError:
            break
        t = float(rng.random())
        ell = distance(space, Q, R)
        Qt = interp(space, Q, R, t)
        lhs = np.cosh(sk * distance(space, P, Qt))
        if sk * ell < 1e-12:
            rhs = (1 - t) * np.cosh(sk * distance(space, P, Q)) + t * np.cosh(
                sk * distance(space, P, R)
            )
        else:
            rhs = (
                np.sinh((1 - t) * sk * ell) * np.cosh(sk * distance(space, P, Q))
                + np.sinh(t * sk * ell) * np.cosh(sk * distance(space, P, R))
            ) / np.sinh(sk * ell)
        done += 1
        if rhs - lhs < best[0]:
            best = (rhs - lhs, (P, Q, R, t))
    if done == 0:
        return ComparisonReport(0.0, None, 0)
    return ComparisonReport(float(best[0]), best[1], done)


# -- barycenter ---------------------------------------------------------------

def barycenter(space, points, weights, tol=1e-9, max_epochs=200000):
    """Minimizer of sum w_i d^2(x, p_i), weights normalized to 1.

    Two-point means are geodesic interpolation exactly; Euclidean means
    are closed-form.  Otherwise the mean is approached by cyclic
    pairwise interpolation with harmonically decaying steps (convergent
    in any NPC space), stopping once an epoch moves the iterate less
    than tol.
    """
    if len(points) < 1:
        raise DomainError("need at least one point")
    w = np.asarray(weights, dtype=float)
    if len(w) != len(points) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise DomainError("weights must be nonnegative and sum to 1")
    for p in points:
        validate_point(space, p)
    live = [(p, wi) for p, wi in zip(points, w) if wi > 0]
    if len(live) == 1:
        return live[0][0]
    if len(live) == 2:
        (p1, w1), (p2, w2) = live
        return interp(space, p1, p2, w2 / (w1 + w2))
    if isinstance(space, Euclidean):
        return EuclideanPoint(sum(wi * p.coords for p, wi in live))
    if isinstance(space, MetricTree):
        return space.barycenter([p for p, _ in live], [wi for _, wi in live], tol=tol)
    x = live[0][0]
    for epoch in range(1, max_epochs + 1):
        start = x
        step = 1.0 / (epoch + 1.0)
        for p, wi in live:
            x = interp(space, x, p, min(1.0, step * wi / np.mean(w)))
        if distance(space, x, start) < tol:
            return x
    return x


# -- serialization -------------------------------------------------------------

def point_to_json(p):
    if isinstance(p, EuclideanPoint):
        return {"space": "euclidean", "coords": [float(x) for x in p.coords]}
    if isinstance(p, H2Point):
        return {"space": "hyperbolic2", "re": float(p.z.real), "im": float(p.z.imag)}
    if isinstance(p, SpdPoint):
        return {"space": "spd", "matrix": [[float(x) for x in row] for row in p.matrix]}
    if isinstance(p, TreePoint):
        return {"space": "tree", "edge": int(p.edge), "offset": float(p.offset)}
    raise InvalidPoint(f"cannot serialize {p!r}")


def point_from_json(doc, space=None):
    kind = doc.get("space")
    if kind == "euclidean":
        return EuclideanPoint(np.array(doc["coords"], dtype=float))
    if kind == "hyperbolic2":
        return H2Point(complex(doc["re"], doc["im"]))
    if kind == "spd":
        return SpdPoint(np.array(doc["matrix"], dtype=float))
    if kind == "tree":
        if isinstance(space, MetricTree):
            return space.point(int(doc["edge"]), float(doc["offset"]))
        return TreePoint(int(doc["edge"]), float(doc["offset"]))
    raise DomainError(f"unknown point tag {kind!r}")
