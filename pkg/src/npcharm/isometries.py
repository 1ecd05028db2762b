"""Isometries of the four spaces: classification, translation length,
decay rays and their fits, minimal loop energy, and (almost-)flat torus
maps for commuting pairs.

For P(n) the key quantity is rho(G) = sqrt(sum_i log^2 |b_i|^2) over the
complex eigenvalues b_i of G; it is a lower bound for the translation
length and equals it.  Displacement along a suitably chosen geodesic ray
decays to the translation length at an exponential rate; the ray comes
from an orthogonal frame adapted to the eigenvalue-modulus flag of G.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import schur
from scipy.optimize import least_squares

from . import spd
from .errors import DomainError, FitError, InvalidPoint, UnsupportedSpace
from .rng import subrng
from .spaces import (
    Euclidean,
    EuclideanPoint,
    H2Point,
    Hyperbolic2,
    MetricTree,
    SpdManifold,
    distance,
    h2_dist,
    interp,
    validate_point,
)
from .spd import GroupElement, SpdPoint
from .tree import TreePoint

SEMISIMPLE_COND_THRESHOLD = 1e8
MODULUS_GAP = 1e-10


# -- payloads ----------------------------------------------------------------

@dataclass(frozen=True)
class Sl2Isometry:
    """Real 2x2 matrix of determinant 1 acting on the disk model through
    the upper half-plane Mobius action."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (2, 2) or abs(np.linalg.det(m) - 1.0) > 1e-9:
            raise InvalidPoint("payload must be a real 2x2 matrix of determinant 1")
        object.__setattr__(self, "matrix", m)

    def inverse(self):
        a, b, c, d = self.matrix.ravel()
        return Sl2Isometry(np.array([[d, -b], [-c, a]]))


@dataclass(frozen=True)
class RigidMotion:
    """Euclidean isometry x -> R x + v with R orthogonal."""

    rotation: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        v = np.asarray(self.shift, dtype=float).ravel()
        if R.shape != (len(v), len(v)):
            raise InvalidPoint("rotation/shift dimension mismatch")
        if np.linalg.norm(R @ R.T - np.eye(len(v))) > 1e-9:
            raise InvalidPoint("rotation part is not orthogonal")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "shift", v)

    def inverse(self):
        return RigidMotion(self.rotation.T, -self.rotation.T @ self.shift)


@dataclass(frozen=True)
class TreeIsometry:
    """Length-preserving automorphism given as a vertex permutation."""

    perm: dict

    def inverse(self):
        return TreeIsometry({v: k for k, v in self.perm.items()})


# -- Cayley transform and the SL(2,R) disk action -----------------------------

def _to_uhp(z):
    return 1j * (1.0 + z) / (1.0 - z)


def _to_disk(w):
    return (w - 1j) / (w + 1j)


def _mobius(m, w):
    a, b, c, d = m.ravel()
    if w is None:  # infinity
        return a / c if abs(c) > 1e-300 else None
    den = c * w + d
    if abs(den) < 1e-300:
        return None
    return (a * w + b) / den


def sl2_apply(m, z):
    """Apply an SL(2,R) element to a Poincare-disk coordinate."""
    return _to_disk(_mobius(m, _to_uhp(z)))


@dataclass
class IsometryDescriptor:
    """Space plus a space-specific isometry payload."""

    space: object
    payload: object

    def apply(self, p):
        validate_point(self.space, p)
        if isinstance(self.space, SpdManifold):
            return spd.group_action(self.payload, p)
        if isinstance(self.space, Hyperbolic2):
            return H2Point(sl2_apply(self.payload.matrix, p.z))
        if isinstance(self.space, Euclidean):
            return EuclideanPoint(self.payload.rotation @ p.coords + self.payload.shift)
        if isinstance(self.space, MetricTree):
            return _tree_apply(self.space, self.payload, p)
        raise UnsupportedSpace(f"unknown space {self.space!r}")

    def inverse(self):
        if isinstance(self.space, SpdManifold):
            return IsometryDescriptor(self.space, self.payload.inverse())
        return IsometryDescriptor(self.space, self.payload.inverse())

    def apply_raw(self, kernel, raw):
        """Vectorized action on a kernel's raw point stack."""
        if isinstance(self.space, SpdManifold):
            G = self.payload.matrix
            return np.einsum("ij,...jk,lk->...il", G, raw, G)
        if isinstance(self.space, Hyperbolic2):
            w = 1j * (1.0 + raw) / (1.0 - raw)
            a, b, c, d = self.payload.matrix.ravel()
            w2 = (a * w + b) / (c * w + d)
            return (w2 - 1j) / (w2 + 1j)
        if isinstance(self.space, Euclidean):
            return raw @ self.payload.rotation.T + self.payload.shift
        if isinstance(self.space, MetricTree):
            e, o = raw
            shape = e.shape
            ef, of = e.ravel(), o.ravel()
            eo, oo = np.empty_like(ef), np.empty_like(of)
            for i in range(len(ef)):
                p = _tree_apply(self.space, self.payload, TreePoint(int(ef[i]), float(of[i])))
                eo[i], oo[i] = p.edge, p.offset
            return (eo.reshape(shape), oo.reshape(shape))
        raise UnsupportedSpace(f"unknown space {self.space!r}")

    def sampled_isometry_defect(self, seed=0, samples=50):
        """max |d(Ip, Iq) - d(p, q)| over random pairs."""
        from .spaces import random_point

        worst = 0.0
        for i in range(samples):
            rng = subrng(seed, i)
            p = random_point(self.space, rng)
            q = random_point(self.space, rng)
            worst = max(
                worst,
                abs(distance(self.space, self.apply(p), self.apply(q)) - distance(self.space, p, q)),
            )
        return worst


def _tree_edge_index(tree, u, v):
    for x, idx, _ in tree._adj[u]:
        if x == v:
            return idx
    raise DomainError(f"permutation does not map edge ({u},{v}) to an edge")


def _tree_apply(tree, iso, p):
    u, v, length = tree.edges[p.edge]
    su, sv = iso.perm[u], iso.perm[v]
    idx = _tree_edge_index(tree, su, sv)
    u2, v2, length2 = tree.edges[idx]
    if abs(length2 - length) > 1e-12:
        raise DomainError("permutation does not preserve edge lengths")
    off = p.offset if u2 == su else length - p.offset
    return tree.point(idx, off)


# -- translation length -------------------------------------------------------

def translation_length_lower_bound(G):
    """rho(G) = sqrt(sum_i (log|b_i|^2)^2) over the eigenvalues of G."""
    Gm = G.matrix if isinstance(G, GroupElement) else np.asarray(G, dtype=float)
    if abs(np.linalg.det(Gm)) <= 1e-12:
        raise DomainError("singular matrix has no translation length")
    ev = np.linalg.eigvals(Gm)
    return float(np.sqrt(np.sum(np.log(np.abs(ev) ** 2) ** 2)))


def is_diagonalizable(Gm, cond_threshold=SEMISIMPLE_COND_THRESHOLD):
    """Numerical semisimplicity test via eigenvector-matrix conditioning."""
    ev, W = np.linalg.eig(Gm)
    s = np.linalg.svd(W, compute_uv=False)
    if s[-1] <= 0:
        return False
    return s[0] / s[-1] < cond_threshold


def h2_translation_length(m):
    tr = abs(np.trace(m))
    if tr <= 2.0:
        return 0.0
    return 2.0 * float(np.arccosh(tr / 2.0))


def euclidean_min_point(payload):
    """Least-squares solution of (R - I)x = -v (a displacement minimizer)."""
    R, v = payload.rotation, payload.shift
    x, *_ = np.linalg.lstsq(R - np.eye(len(v)), -v, rcond=None)
    return EuclideanPoint(x)


def translation_length(iso):
    """Exact translation length per space."""
    if isinstance(iso.space, SpdManifold):
        return translation_length_lower_bound(iso.payload)
    if isinstance(iso.space, Hyperbolic2):
        return h2_translation_length(iso.payload.matrix)
    if isinstance(iso.space, Euclidean):
        x = euclidean_min_point(iso.payload).coords
        return float(np.linalg.norm(iso.payload.rotation @ x + iso.payload.shift - x))
    if isinstance(iso.space, MetricTree):
        return 0.0  # finite-tree automorphisms are elliptic
    raise UnsupportedSpace(f"unknown space {iso.space!r}")


def classify_matrix(Gm, cond_threshold=SEMISIMPLE_COND_THRESHOLD):
    if not is_diagonalizable(Gm, cond_threshold):
        return "parabolic"
    return "hyperbolic" if translation_length_lower_bound(Gm) > 1e-10 else "elliptic"


def classify_isometry(iso, cond_threshold=SEMISIMPLE_COND_THRESHOLD):
    """'elliptic', 'hyperbolic', or 'parabolic'."""
    if isinstance(iso.space, SpdManifold):
        return classify_matrix(iso.payload.matrix, cond_threshold)
    if isinstance(iso.space, Hyperbolic2):
        m = iso.payload.matrix
        tr = abs(np.trace(m))
        if abs(tr - 2.0) <= 1e-10:
            if np.allclose(m, np.eye(2)) or np.allclose(m, -np.eye(2)):
                return "elliptic"
            return "parabolic"
        return "elliptic" if tr < 2.0 else "hyperbolic"
    if isinstance(iso.space, Euclidean):
        return "hyperbolic" if translation_length(iso) > 1e-10 else "elliptic"
    if isinstance(iso.space, MetricTree):
        return "elliptic"
    raise UnsupportedSpace(f"unknown space {iso.space!r}")


def min_energy_constant(iso):
    """Minimal loop energy of the twisted circle bundle, Delta^2 / (2 pi)."""
    d = translation_length(iso)
    return d * d / (2.0 * np.pi)


# -- Iwasawa decomposition ------------------------------------------------------

def iwasawa(G):
    """G = O A N with O orthogonal, A positive diagonal, N unit upper
    triangular, by Gram-Schmidt on the columns of G."""
    Gm = G.matrix if isinstance(G, GroupElement) else np.asarray(G, dtype=float)
    n = Gm.shape[0]
    if abs(np.linalg.det(Gm)) <= 1e-12:
        raise DomainError("singular matrix has no Iwasawa decomposition")
    O = np.zeros_like(Gm)
    R = np.zeros_like(Gm)
    for j in range(n):
        v = Gm[:, j].copy()
        for i in range(j):
            R[i, j] = O[:, i] @ Gm[:, j]
            v -= R[i, j] * O[:, i]
        R[j, j] = np.linalg.norm(v)
        if R[j, j] <= 1e-300:
            raise DomainError("columns are numerically dependent")
        O[:, j] = v / R[j, j]
    A = np.diag(np.diag(R))
    N = np.diag(1.0 / np.diag(R)) @ R
    return O, A, N


# -- displacement minimizers and decay rays -------------------------------------

def real_eigenbasis(Gm, gap=MODULUS_GAP):
    """Real basis S and per-column squared-modulus log values for a
    diagonalizable real matrix.  Complex pairs contribute two columns
    (real and imaginary parts) sharing one modulus."""
    ev, W = np.linalg.eig(Gm)
    n = Gm.shape[0]
    used = np.zeros(n, dtype=bool)
    cols, logs = [], []
    for k in range(n):
        if used[k]:
            continue
        lam, w = ev[k], W[:, k]
        if abs(lam.imag) <= 1e-12 * max(1.0, abs(lam)):
            cols.append(w.real if np.linalg.norm(w.real) > np.linalg.norm(w.imag) else w.imag)
            logs.append(np.log(abs(lam) ** 2))
            used[k] = True
        else:
            used[k] = True
            # locate the conjugate partner
            for j in range(k + 1, n):
                if not used[j] and abs(ev[j] - np.conj(lam)) <= 1e-8 * max(1.0, abs(lam)):
                    used[j] = True
                    break
            cols.append(w.real)
            cols.append(w.imag)
            logs.extend([np.log(abs(lam) ** 2)] * 2)
    S = np.column_stack(cols)
    if abs(np.linalg.det(S)) < 1e-12:
        raise DomainError("eigenbasis is numerically singular")
    return S, np.array(logs)


def min_displacement_point(G):
    """A point p with d(p, G.p) = rho(G), for semisimple G.

    If S is a real eigenbasis of G then p = S S^T works: congruence by S
    turns G into its block-diagonal normal form, which translates the
    diagonal geodesic through e.
    """
    Gm = G.matrix if isinstance(G, GroupElement) else np.asarray(G, dtype=float)
    if not is_diagonalizable(Gm):
        raise DomainError("parabolic elements do not attain their translation length")
    S, _ = real_eigenbasis(Gm)
    p = SpdPoint(S @ S.T)
    # certificate: rho is a lower bound, so matching it proves minimality
    disp = spd.spd_distance(p, spd.group_action(Gm, p))
    rho = translation_length_lower_bound(Gm)
    if disp > rho + 1e-6 * (1.0 + rho):
        raise DomainError(f"min-point construction failed (d={disp}, rho={rho})")
    return p


@dataclass
class SpdDecayRay:
    """Unit-speed geodesic ray c(t) = S exp(tV) S^T in P(n)."""

    frame: np.ndarray  # S
    direction: np.ndarray  # diagonal of V

    def matrix_at(self, t):
        core = np.diag(np.exp(np.asarray(t, dtype=float) * self.direction))
        out = self.frame @ core @ self.frame.T
        return 0.5 * (out + out.T)

    def __call__(self, t):
        return SpdPoint(self.matrix_at(t))

    def conjugated_element(self, Gm, t):
        """c(t)^(-1/2) G c(t)^(1/2) in the ray frame, for flag frames.

        Only meaningful when the frame is orthogonal (parabolic
        construction); the off-diagonal entries of the result measure the
        horospherical part of G along the ray.
        """
        half = 0.5 * t * self.direction
        T = self.frame.T @ Gm @ self.frame
        return np.exp(-half)[:, None] * T * np.exp(half)[None, :]


@dataclass
class DecayFit:
    delta: float
    a: float
    b: float
    r_squared: float
    classification: str


def _ordered_schur_desc(Gm, gap=MODULUS_GAP):
    """Orthogonal O with O^T G O quasi-upper-triangular and diagonal
    blocks ordered by descending eigenvalue modulus."""
    n = Gm.shape[0]
    moduli = np.abs(np.linalg.eigvals(Gm))
    groups = []
    for r in sorted(moduli, reverse=True):
        if not groups or abs(r - groups[-1]) > gap * max(1.0, groups[-1]):
            groups.append(r)
    O = np.eye(n)
    offset = 0
    A = Gm.copy()
    for gi, r in enumerate(groups[:-1]):
        nxt = groups[gi + 1]
        cut = np.sqrt(r * nxt) if nxt > 0 else 0.5 * r
        T, Z, sdim = schur(
            A, output="real", sort=lambda ar, ai: np.hypot(ar, ai) > cut
        )
        full = np.eye(n)
        full[offset:, offset:] = Z
        O = O @ full
        offset += sdim
        A = T[sdim:, sdim:]
    if offset < n:
        T, Z = schur(A, output="real")
        full = np.eye(n)
        full[offset:, offset:] = Z
        O = O @ full
    return O


def _subblock_sizes(T, tol=1e-9):
    n = T.shape[0]
    scale = max(1.0, np.linalg.norm(T))
    sizes = []
    i = 0
    while i < n:
        if i + 1 < n and abs(T[i + 1, i]) > tol * scale:
            sizes.append(2)
            i += 2
        else:
            sizes.append(1)
            i += 1
    return sizes


def decay_ray(G, t_max=40.0, steps=400, gap=MODULUS_GAP):
    """Geodesic ray along which the displacement of G decays to rho(G),
    plus the fitted decay of the measured displacement series.

    Semisimple G: the ray is G's axis through a displacement minimizer
    (constant for elliptic), so the series is constant.  Parabolic G: the
    ray direction separates the eigenvalue-modulus flag of G; strictly
    decreasing entries are assigned across the Schur sub-blocks (equal on
    each 2x2 rotation block) so the horospherical part of G dies off
    exponentially along the ray.
    """
    Gm = G.matrix if isinstance(G, GroupElement) else np.asarray(G, dtype=float)
    if abs(np.linalg.det(Gm)) <= 1e-12:
        raise DomainError("singular matrix")
    rho = translation_length_lower_bound(Gm)
    if is_diagonalizable(Gm):
        S, logs = real_eigenbasis(Gm)
        v = logs / rho if rho > 1e-300 else np.zeros_like(logs)
        ray = SpdDecayRay(S, _shift_normalize(v))
    else:
        O = _ordered_schur_desc(Gm, gap)
        T = O.T @ Gm @ O
        sizes = _subblock_sizes(T)
        # group sub-blocks by modulus, spread strictly inside each group
        vals = []
        i = 0
        block_mods = []
        for s in sizes:
            sub = T[i : i + s, i : i + s]
            block_mods.append(np.sqrt(abs(np.linalg.det(sub))) if s == 2 else abs(sub[0, 0]))
            i += s
        logs = [np.log(r**2) for r in block_mods]
        distinct = sorted(set(np.round(np.array(logs), 12)), reverse=True)
        min_gap = min(
            [abs(a - b) for a, b in zip(distinct, distinct[1:])] or [2.0]
        )
        eps = min(1.0, 0.25 * min_gap / max(1, len(sizes)))
        group_rank = {}
        for s, lg in zip(sizes, logs):
            key = round(lg, 12)
            r = group_rank.get(key, 0)
            group_rank[key] = r + 1
            vals.extend([lg - eps * r] * s)
        ray = SpdDecayRay(O, _shift_normalize(np.array(vals)))
    ts = np.linspace(0.0, t_max, steps)
    series = []
    for t in ts:
        c = ray.matrix_at(t)
        gc = Gm @ c @ Gm.T
        series.append((float(t), spd.spd_distance(c, 0.5 * (gc + gc.T))))
    fit = fit_exponential_decay(series)
    return ray, fit


def _shift_normalize(v):
    """Shift the ray direction so its smallest entry is 0 (the homothety
    p -> lambda p is an isometry, so displacement along the ray is
    unchanged) and renormalize to unit speed.  Keeping all entries
    nonnegative pins every ray point's smallest eigenvalue away from 0."""
    v = np.asarray(v, dtype=float)
    if not v.size:
        return v
    v = v - v.min()
    nrm = np.linalg.norm(v)
    return v / nrm if nrm > 1e-300 else v


def measure_displacement(iso, ray_points, ts=None):
    """[(t, d(c(t), I c(t)))] for the given ray samples."""
    if ts is None:
        ts = list(range(len(ray_points)))
    out = []
    for t, p in zip(ts, ray_points):
        out.append((float(t), distance(iso.space, p, iso.apply(p))))
    return out


EPS_FLOOR = 1e-14


def fit_exponential_decay(series, tail_fraction=0.5):
    """Fit displacement(t) ~ delta + b exp(-a t).

    delta is the minimum over the tail; (a, b) come from least squares of
    log(d - delta + floor) against t on the tail half.  The last 5% of the
    tail (where subtracting the estimated delta destroys the signal) and
    floored points are excluded from the regression.
    """
    if len(series) < 8:
        raise DomainError("need at least 8 samples to fit")
    ts = np.array([t for t, _ in series], dtype=float)
    ds = np.array([d for _, d in series], dtype=float)
    scale = float(np.max(ds))
    n = len(ts)
    tail = slice(int(np.floor(n * (1.0 - tail_fraction))), n)
    tt, dd = ts[tail], ds[tail]
    delta = float(np.min(dd))
    if scale <= 1e-12:
        return DecayFit(0.0, 0.0, 0.0, 1.0, "elliptic")
    if np.max(ds) - np.min(ds) <= 1e-8 * scale + 1e-12:
        return DecayFit(float(np.mean(ds)), 0.0, 0.0, 1.0, "hyperbolic")
    # monotonicity: reject series that keep growing on the tail
    k = max(2, len(dd) // 4)
    if np.mean(dd[-k:]) > np.mean(dd[:k]) + 1e-8 * scale:
        raise FitError("series increases along the ray; no decay to fit", series=series)
    resid = dd - delta
    keep = resid > 10.0 * EPS_FLOOR
    keep[int(np.ceil(0.95 * len(keep))):] = False
    if np.count_nonzero(keep) < 4:
        return DecayFit(delta, 0.0, 0.0, 1.0, "hyperbolic" if delta > 1e-10 else "elliptic")
    y = np.log(resid[keep] + EPS_FLOOR)
    x = tt[keep]
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    yhat = A @ np.array([slope, intercept])
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    a, b = -float(slope), float(np.exp(intercept))
    if a <= 0:
        raise FitError("tail does not decay exponentially", series=series)
    return DecayFit(delta, a, b, r2, "parabolic")


def refine_decay_fit(series, fit):
    """Nonlinear refinement of (delta, a, b) in log-displacement space."""
    ts = np.array([t for t, _ in series], dtype=float)
    ds = np.array([d for _, d in series], dtype=float)

    def resid(p):
        delta, a, b = p
        model = np.maximum(delta + b * np.exp(-a * ts), EPS_FLOOR)
        return np.log(model) - np.log(np.maximum(ds, EPS_FLOOR))

    x0 = np.array([max(fit.delta, 0.0), max(fit.a, 1e-3), max(fit.b, EPS_FLOOR)])
    sol = least_squares(resid, x0, bounds=([0.0, 1e-6, 0.0], [np.inf] * 3))
    delta, a, b = sol.x
    return DecayFit(float(delta), float(a), float(b), fit.r_squared, fit.classification)


# -- hyperbolic-plane rays -----------------------------------------------------

def h2_fixed_points_uhp(m):
    """Fixed points of the Mobius action on the closed upper half-plane.

    Returns a list of boundary points (reals and possibly None for
    infinity) for non-elliptic elements, or a single interior complex
    fixed point for elliptic ones.
    """
    a, b, c, d = np.asarray(m, dtype=float).ravel()
    if abs(c) < 1e-14:
        pts = [None]  # infinity is fixed
        if abs(d - a) > 1e-14:
            pts.append(b / (d - a))
        return pts
    disc = (a + d) ** 2 - 4.0
    if disc >= 0:
        r = np.sqrt(disc)
        return [((a - d) + r) / (2 * c), ((a - d) - r) / (2 * c)]
    r = np.sqrt(-disc)
    w = complex((a - d) / (2 * c), r / (2 * abs(c)))
    return [w if w.imag > 0 else np.conj(w)]


def h2_decay_ray(m):
    """Unit-speed ray along which the displacement of an SL(2,R) element
    decays to its translation length: the axis for hyperbolic elements, a
    ray into the fixed boundary point for parabolic ones, and the fixed
    point for elliptic ones.  Returns a callable t -> H2Point."""
    m = np.asarray(m, dtype=float)
    cls = classify_isometry(IsometryDescriptor(Hyperbolic2(), Sl2Isometry(m)))
    fixed = h2_fixed_points_uhp(m)
    if cls == "elliptic":
        if np.allclose(m, np.eye(2)) or np.allclose(m, -np.eye(2)):
            base = 1j
        else:
            base = fixed[0]
        z0 = _to_disk(base)
        return lambda t: H2Point(z0)
    if cls == "hyperbolic":
        x1, x2 = fixed
        if x1 is None or x2 is None:
            xf = x1 if x1 is not None else x2
            # axis is the vertical line over xf
            def ray(t, xf=xf):
                return H2Point(_to_disk(xf + 1j * np.exp(t)))

            return ray
        center, radius = 0.5 * (x1 + x2), 0.5 * abs(x1 - x2)

        def ray(t, center=center, radius=radius, sign=1.0 if x2 > x1 else -1.0):
            # arclength parameterization of the semicircle axis
            phi = 2.0 * np.arctan(np.exp(sign * t)) - np.pi / 2.0
            return H2Point(_to_disk(complex(center + radius * np.sin(phi), radius * np.cos(phi))))

        return ray
    xi = fixed[0]
    if xi is None:
        return lambda t: H2Point(_to_disk(1j * np.exp(t)))

    def ray(t, xi=xi):
        # send xi to infinity by w -> -1/(w - xi), ride the vertical ray back
        u = 1j * np.exp(t)
        return H2Point(_to_disk(xi - 1.0 / u))

    return ray


# -- minimizers for prototype construction --------------------------------------

def displacement_minimizer(iso):
    """A point of Min(I) for semisimple isometries (None for parabolic)."""
    cls = classify_isometry(iso)
    if cls == "parabolic":
        return None
    if isinstance(iso.space, SpdManifold):
        return min_displacement_point(iso.payload)
    if isinstance(iso.space, Hyperbolic2):
        m = iso.payload.matrix
        fixed = h2_fixed_points_uhp(m)
        if cls == "elliptic":
            if np.allclose(m, np.eye(2)) or np.allclose(m, -np.eye(2)):
                return H2Point(0j)
            return H2Point(_to_disk(fixed[0]))
        x1, x2 = fixed
        if x1 is None or x2 is None:
            xf = x1 if x1 is not None else x2
            return H2Point(_to_disk(xf + 1j))
        return H2Point(_to_disk(complex(0.5 * (x1 + x2), 0.5 * abs(x1 - x2))))
    if isinstance(iso.space, Euclidean):
        return euclidean_min_point(iso.payload)
    if isinstance(iso.space, MetricTree):
        return _tree_center(iso)
    raise UnsupportedSpace(f"unknown space {iso.space!r}")


def _tree_center(iso):
    tree = iso.space
    for v in tree.vertices:
        if iso.payload.perm[v] == v:
            return tree.vertex_point(v)
    for idx, (u, v, length) in enumerate(tree.edges):
        if iso.payload.perm[u] == v and iso.payload.perm[v] == u:
            return tree.point(idx, 0.5 * length)
    raise DomainError("tree automorphism has no fixed vertex or inverted edge")


# -- torus maps ------------------------------------------------------------------

@dataclass
class TorusMap:
    """Equivariant (almost-)flat torus map built from a commuting pair.

    evaluate(x, y) is defined for flat maps; evaluate(t, x, y) for
    almost-flat ones (extra decay parameter t along the shared ray).
    derivative_bounds holds sampled squared derivative norms.
    """

    generators: tuple
    evaluate: object
    parabolic: bool
    fits: tuple = ()
    derivative_bounds: dict = field(default_factory=dict)

    def equivariance_defect(self, samples=20, seed=0, t=None):
        I1, I2 = self.generators
        space = I1.space
        worst = 0.0
        for i in range(samples):
            rng = subrng(seed, i)
            x, y = 4.0 * np.pi * rng.random(2) - 2.0 * np.pi
            if self.parabolic:
                tv = 5.0 * rng.random() if t is None else t
                h = self.evaluate(tv, x, y)
                hx = self.evaluate(tv, x + 2.0 * np.pi, y)
                hy = self.evaluate(tv, x, y + 2.0 * np.pi)
            else:
                h = self.evaluate(x, y)
                hx = self.evaluate(x + 2.0 * np.pi, y)
                hy = self.evaluate(x, y + 2.0 * np.pi)
            worst = max(worst, distance(space, hx, I1.apply(h)))
            worst = max(worst, distance(space, hy, I2.apply(h)))
        return worst


def _commutation_defect(G1, G2):
    m1, m2 = G1.matrix, G2.matrix
    return float(
        np.linalg.norm(m1 @ m2 - m2 @ m1)
        / max(1.0, np.linalg.norm(m1) * np.linalg.norm(m2))
    )


def flat_torus_map(I1, I2):
    """Totally geodesic equivariant torus map for a commuting semisimple
    pair: h(x, y) = S exp((x W1 + y W2) / 2pi) S^T in a simultaneous real
    eigenbasis S, with W_m the diagonal log-modulus directions."""
    if not isinstance(I1.space, SpdManifold) or not isinstance(I2.space, SpdManifold):
        raise UnsupportedSpace("flat torus maps are constructed for SPD targets")
    G1, G2 = I1.payload, I2.payload
    if _commutation_defect(G1, G2) > 1e-10:
        raise DomainError("generators do not commute")
    for iso in (I1, I2):
        if classify_isometry(iso) == "parabolic":
            raise DomainError("generators must be semisimple")
    # a generic commuting combination has the simultaneous eigenbasis
    S, _ = real_eigenbasis(G1.matrix + np.pi * G2.matrix)
    Si = np.linalg.inv(S)
    W = []
    for G in (G1, G2):
        B = Si @ G.matrix @ Si.T  # inverse congruence of G.(S S^T)-normal form
        D = Si @ G.matrix @ S
        # diagonal of log(D D^T) in the block basis: log moduli squared
        M = D @ D.T
        W.append(np.log(np.maximum(np.diag(M), 1e-300)))
    W1, W2 = W

    def evaluate(x, y):
        core = np.diag(np.exp((x * W1 + y * W2) / (2.0 * np.pi)))
        out = S @ core @ S.T
        return SpdPoint(0.5 * (out + out.T))

    tm = TorusMap((I1, I2), evaluate, parabolic=False)
    defect = tm.equivariance_defect()
    if defect > 1e-8:
        raise DomainError(f"pair is not simultaneously reducible (defect {defect:.2e})")
    d1 = translation_length(I1)
    d2 = translation_length(I2)
    # coordinate lines are constant-speed geodesics, so chord ratios over a
    # finite step measure the derivative norm exactly
    h = 0.5
    base = evaluate(0.3, 0.4)
    dx = distance(I1.space, base, evaluate(0.3 + h, 0.4)) / h
    dy = distance(I1.space, base, evaluate(0.3, 0.4 + h)) / h
    tm.derivative_bounds = {
        "dx_sq": dx * dx,
        "dy_sq": dy * dy,
        "dx_sq_expected": d1 * d1 / (4 * np.pi**2),
        "dy_sq_expected": d2 * d2 / (4 * np.pi**2),
    }
    return tm


def almost_flat_torus_map(I1, I2, t_max=40.0, steps=400):
    """Equivariant family for a commuting parabolic pair, built by
    geodesic quadrilateral filling over a shared decay ray."""
    for iso in (I1, I2):
        if classify_isometry(iso) != "parabolic":
            raise DomainError("generators must be parabolic")
    space = I1.space
    if isinstance(space, SpdManifold):
        if _commutation_defect(I1.payload, I2.payload) > 1e-10:
            raise DomainError("generators do not commute")
        ray, fit1 = decay_ray(I1.payload, t_max=t_max, steps=steps)
        ray_points = ray
    elif isinstance(space, Hyperbolic2):
        m1, m2 = I1.payload.matrix, I2.payload.matrix
        if np.linalg.norm(m1 @ m2 - m2 @ m1) > 1e-10:
            raise DomainError("generators do not commute")
        ray_points = h2_decay_ray(m1)
        ts = np.linspace(0.0, t_max, steps)
        fit1 = fit_exponential_decay(
            measure_displacement(I1, [ray_points(t) for t in ts], ts)
        )
    else:
        raise UnsupportedSpace("almost-flat torus maps need SPD or hyperbolic targets")
    ts = np.linspace(0.0, t_max, steps)
    series2 = measure_displacement(I2, [ray_points(t) for t in ts], ts)
    try:
        fit2 = fit_exponential_decay(series2)
    except FitError as exc:
        raise DomainError("generators do not share a fixed point at infinity") from exc
    if fit2.classification == "hyperbolic" and fit2.delta > translation_length(I2) + 1e-6:
        raise DomainError("generators do not share a fixed point at infinity")

    def evaluate(t, x, y):
        kx, x0 = divmod(x, 2.0 * np.pi)
        ky, y0 = divmod(y, 2.0 * np.pi)
        c = ray_points(t)
        p00 = c
        p10 = I1.apply(c)
        p01 = I2.apply(c)
        p11 = I1.apply(I2.apply(c))
        a = interp(space, p00, p10, x0 / (2.0 * np.pi))
        b = interp(space, p01, p11, x0 / (2.0 * np.pi))
        val = interp(space, a, b, y0 / (2.0 * np.pi))
        for _ in range(int(round(kx))):
            val = I1.apply(val)
        for _ in range(int(round(-kx))):
            val = I1.inverse().apply(val)
        for _ in range(int(round(ky))):
            val = I2.apply(val)
        for _ in range(int(round(-ky))):
            val = I2.inverse().apply(val)
        return val

    tm = TorusMap((I1, I2), evaluate, parabolic=True, fits=(fit1, fit2))
    # chord-ratio derivative estimates over finite steps; the x- and
    # y-lines are built from geodesics, so these are well conditioned even
    # where the chords are exponentially short
    step = 0.5 * np.pi
    coords = (0.7, 2.1, 4.2)
    samples = {}
    for t in (5.0, 10.0, 20.0):
        dt = dx = dy = 0.0
        for x in coords:
            for y in coords:
                base = evaluate(t, x, y)
                dt = max(dt, distance(space, base, evaluate(t + 0.5, x, y)) / 0.5)
                dx = max(dx, distance(space, base, evaluate(t, x + step, y)) / step)
                dy = max(dy, distance(space, base, evaluate(t, x, y + step)) / step)
        samples[t] = {"dt_sq": dt * dt, "dx_sq": dx * dx, "dy_sq": dy * dy}
    tm.derivative_bounds = samples
    return tm
