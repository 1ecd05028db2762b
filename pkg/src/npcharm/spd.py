"""Geometry of P(n), the cone of symmetric positive definite matrices.

The metric is the affine-invariant one, <V,W>_p = tr(p^-1 V p^-1 W), and
GL(n) acts by congruence G.p = G p G^T.  With this normalization the
geodesic through the identity with direction V is exp(tV) and
d(e, exp(V)) = |V| = sqrt(tr V^2).

All matrix functions of symmetric matrices are computed through a
self-contained cyclic Jacobi eigensolver (adequate for the n <= 16 sizes
this toolkit targets).  A closed-form batched path for n = 2 backs the
grid solver.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidPoint

SYM_TOL = 1e-12
EIG_FLOOR = 1e-12


def sym_defect(m):
    """Relative asymmetry |m - m^T| / max(1, |m|) in Frobenius norm."""
    m = np.asarray(m, dtype=float)
    return float(np.linalg.norm(m - m.T) / max(1.0, np.linalg.norm(m)))


def _require_sym(m, tol=SYM_TOL, what="matrix"):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError(f"{what} must be square, got shape {m.shape}")
    if sym_defect(m) > tol:
        raise DomainError(f"{what} is not symmetric (defect {sym_defect(m):.2e})")
    return 0.5 * (m + m.T)


def jacobi_eig(S, tol=1e-14, max_sweeps=100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Returns (eigenvalues descending, rotation) with
    rotation @ diag(eigenvalues) @ rotation.T == S.
    """
    A = _require_sym(S, what="sym_eig input").copy()
    n = A.shape[0]
    Q = np.eye(n)
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(n), Q
    for _ in range(max_sweeps):
        # off-diagonal norm summed directly (a sum-of-squares difference
        # cancels catastrophically when the diagonal dominates)
        off = np.sqrt(np.sum((A - np.diag(np.diag(A))) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 0.25 * tol * scale / n:
                    continue
                theta = 0.5 * np.arctan2(2.0 * apq, A[q, q] - A[p, p])
                c, s = np.cos(theta), np.sin(theta)
                # rotate rows/cols p,q of A and columns of Q
                Ap, Aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
                Ap, Aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                A[p, q] = A[q, p] = 0.0
                Qp, Qq = Q[:, p].copy(), Q[:, q].copy()
                Q[:, p] = c * Qp - s * Qq
                Q[:, q] = s * Qp + c * Qq
    w = np.diag(A).copy()
    order = np.argsort(w)[::-1]
    return w[order], Q[:, order]


def sym_fun(S, f):
    """Apply a scalar function to a symmetric matrix spectrally."""
    w, Q = jacobi_eig(S)
    return (Q * f(w)) @ Q.T


def sym_exp(V):
    return sym_fun(V, np.exp)


def spd_log_matrix(p):
    """Matrix logarithm of an SPD matrix (DomainError if not PD)."""
    w, Q = jacobi_eig(p)
    if w[-1] <= EIG_FLOOR:
        raise DomainError(f"matrix is not positive definite (min eig {w[-1]:.2e})")
    return (Q * np.log(w)) @ Q.T


def spd_sqrt(p):
    w, Q = jacobi_eig(p)
    if w[-1] <= 1e-14:
        raise DomainError(f"matrix is not positive definite (min eig {w[-1]:.2e})")
    return (Q * np.sqrt(w)) @ Q.T


def spd_invsqrt(p):
    w, Q = jacobi_eig(p)
    if w[-1] <= 1e-14:
        raise DomainError(f"matrix is not positive definite (min eig {w[-1]:.2e})")
    return (Q / np.sqrt(w)) @ Q.T


@dataclass(frozen=True)
class SpdPoint:
    """Point of P(n): a symmetric positive definite matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if sym_defect(m) > SYM_TOL:
            raise InvalidPoint(f"SPD point not symmetric (defect {sym_defect(m):.2e})")
        m = 0.5 * (m + m.T)
        w, _ = jacobi_eig(m)
        if w[-1] <= EIG_FLOOR:
            raise InvalidPoint(f"SPD point not positive definite (min eig {w[-1]:.2e})")
        object.__setattr__(self, "matrix", m)

    @property
    def n(self):
        return self.matrix.shape[0]


@dataclass(frozen=True)
class TangentVector:
    """Symmetric matrix attached to a base point of P(n)."""

    base: SpdPoint
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if sym_defect(m) > SYM_TOL:
            raise InvalidPoint("tangent vector not symmetric")
        object.__setattr__(self, "matrix", 0.5 * (m + m.T))

    def norm(self):
        return spd_norm(self.base, self.matrix)


@dataclass(frozen=True)
class GroupElement:
    """Invertible real matrix acting on P(n) by G.p = G p G^T."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidPoint(f"group element must be square, got {m.shape}")
        if abs(np.linalg.det(m)) <= 1e-12:
            raise InvalidPoint("group element is singular")
        object.__setattr__(self, "matrix", m)

    @property
    def n(self):
        return self.matrix.shape[0]

    def inverse(self):
        return GroupElement(np.linalg.inv(self.matrix))


def identity(n):
    return SpdPoint(np.eye(n))


def sym_eig(S):
    """Public eigensolver: (eigenvalues descending, orthogonal rotation)."""
    return jacobi_eig(S)


def spd_inner(p, V, W):
    """<V,W>_p = tr(p^-1 V p^-1 W)."""
    pinv = np.linalg.inv(_as_matrix(p))
    return float(np.trace(pinv @ V @ pinv @ W))


def spd_norm(p, V):
    return float(np.sqrt(max(0.0, spd_inner(p, V, V))))


def _as_matrix(p):
    return p.matrix if isinstance(p, SpdPoint) else np.asarray(p, dtype=float)


def _check_same_dim(p, q):
    if _as_matrix(p).shape != _as_matrix(q).shape:
        raise InvalidPoint(
            f"dimension mismatch: {_as_matrix(p).shape} vs {_as_matrix(q).shape}"
        )


def spd_distance(p, q):
    """Geodesic distance sqrt(sum log^2 lambda_i(p^-1 q))."""
    _check_same_dim(p, q)
    pm, qm = _as_matrix(p), _as_matrix(q)
    pis = spd_invsqrt(pm)
    M = pis @ qm @ pis
    w, _ = jacobi_eig(0.5 * (M + M.T))
    if w[-1] <= 0:
        raise InvalidPoint("second argument is not positive definite")
    return float(np.sqrt(np.sum(np.log(w) ** 2)))


def spd_exp(base, V, t=1.0):
    """Geodesic from base with initial direction V, evaluated at time t.

    At base = e this is exp(tV); in general
    p^(1/2) exp(t p^(-1/2) V p^(-1/2)) p^(1/2), a constant-speed geodesic
    with speed |V|_base.
    """
    bm = _as_matrix(base)
    Vm = V.matrix if isinstance(V, TangentVector) else np.asarray(V, dtype=float)
    r = spd_sqrt(bm)
    ri = spd_invsqrt(bm)
    inner = sym_exp(t * 0.5 * ((ri @ Vm @ ri) + (ri @ Vm @ ri).T))
    out = r @ inner @ r
    return SpdPoint(0.5 * (out + out.T))


def spd_log(p, q):
    """Inverse of spd_exp: tangent V at p with spd_exp(p, V, 1) = q."""
    _check_same_dim(p, q)
    pm, qm = _as_matrix(p), _as_matrix(q)
    r = spd_sqrt(pm)
    ri = spd_invsqrt(pm)
    M = ri @ qm @ ri
    L = spd_log_matrix(0.5 * (M + M.T))
    out = r @ L @ r
    return TangentVector(SpdPoint(pm), 0.5 * (out + out.T))


def spd_interp(p, q, t):
    """Geodesic interpolation (1-t)p + tq in P(n)."""
    pm, qm = _as_matrix(p), _as_matrix(q)
    r = spd_sqrt(pm)
    ri = spd_invsqrt(pm)
    M = ri @ qm @ ri
    w, Q = jacobi_eig(0.5 * (M + M.T))
    if w[-1] <= 0:
        raise InvalidPoint("interp endpoint is not positive definite")
    inner = (Q * np.power(w, t)) @ Q.T
    out = r @ inner @ r
    return SpdPoint(0.5 * (out + out.T))


def group_action(G, p):
    """G.p = G p G^T, an isometry of P(n)."""
    Gm = G.matrix if isinstance(G, GroupElement) else np.asarray(G, dtype=float)
    pm = _as_matrix(p)
    if Gm.shape[0] != pm.shape[0]:
        raise InvalidPoint(f"dimension mismatch: G is {Gm.shape}, p is {pm.shape}")
    out = Gm @ pm @ Gm.T
    return SpdPoint(0.5 * (out + out.T))


def export_geodesic_csv(path, base, V, ts):
    """Write geodesic samples (t, row-major matrix entries) as CSV."""
    n = _as_matrix(base).shape[0]
    header = "t," + ",".join(f"m{i}{j}" for i in range(n) for j in range(n))
    lines = [header]
    for t in ts:
        p = spd_exp(base, V, float(t))
        lines.append(",".join([repr(float(t))] + [repr(float(x)) for x in p.matrix.ravel()]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Batched closed-form operations for stacks of 2x2 SPD matrices.  A 2x2
# symmetric eigenproblem is solved exactly by a single Jacobi rotation,
# which is what these formulas compute, vectorized over the stack.

def eig2(S):
    """Eigenvalues and rotation angle fields for stacked 2x2 sym.

    w1 is the root paired with the rotation's first column (half trace
    plus discriminant); the other root comes from det / w1 whenever that
    is the stable route, avoiding the subtraction cancellation that loses
    a small eigenvalue next to a huge one.
    """
    a, b, c = S[..., 0, 0], S[..., 0, 1], S[..., 1, 1]
    half_tr = 0.5 * (a + c)
    disc = np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b**2, 0.0))
    w1 = half_tr + disc
    det = a * c - b * b
    safe = np.abs(w1) > 1e-300
    w2 = np.where(safe, det / np.where(safe, w1, 1.0), half_tr - disc)
    # when half_tr < 0 the sum route cancels in w1 instead; swap roles
    neg = half_tr < 0
    w2_neg = half_tr - disc
    safe_n = np.abs(w2_neg) > 1e-300
    w1 = np.where(neg, np.where(safe_n, det / np.where(safe_n, w2_neg, 1.0), w1), w1)
    w2 = np.where(neg, w2_neg, w2)
    theta = 0.5 * np.arctan2(2.0 * b, a - c)
    return w1, w2, theta


def _recompose2(w1, w2, theta):
    ct, st = np.cos(theta), np.sin(theta)
    out = np.empty(w1.shape + (2, 2))
    out[..., 0, 0] = ct**2 * w1 + st**2 * w2
    out[..., 1, 1] = st**2 * w1 + ct**2 * w2
    out[..., 0, 1] = out[..., 1, 0] = ct * st * (w1 - w2)
    return out


def fun2(S, f):
    """f applied spectrally to stacked 2x2 symmetric matrices."""
    w1, w2, theta = eig2(S)
    return _recompose2(f(w1), f(w2), theta)


def mul2(A, B):
    """Stacked 2x2 matrix product."""
    return np.einsum("...ij,...jk->...ik", A, B)


def sym2(A):
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def dist2_sq(P, Q):
    """Squared distance for stacked 2x2 SPD matrices."""
    Pi = fun2(P, lambda w: 1.0 / np.sqrt(np.maximum(w, 1e-300)))
    M = sym2(mul2(Pi, mul2(Q, Pi)))
    w1, w2, _ = eig2(M)
    w1 = np.maximum(w1, 1e-300)
    w2 = np.maximum(w2, 1e-300)
    return np.log(w1) ** 2 + np.log(w2) ** 2


def interp2(P, Q, t):
    """Stacked geodesic interpolation; t broadcasts over the stack."""
    R = fun2(P, np.sqrt)
    Ri = fun2(P, lambda w: 1.0 / np.sqrt(np.maximum(w, 1e-300)))
    M = sym2(mul2(Ri, mul2(Q, Ri)))
    w1, w2, theta = eig2(M)
    t = np.asarray(t)
    lw1 = np.log(np.maximum(w1, 1e-300))
    lw2 = np.log(np.maximum(w2, 1e-300))
    core = _recompose2(np.exp(t * lw1), np.exp(t * lw2), theta)
    return sym2(mul2(R, mul2(core, R)))


def log2_map(P, Q):
    """Stacked spd_log: tangent matrices at P pointing to Q."""
    R = fun2(P, np.sqrt)
    Ri = fun2(P, lambda w: 1.0 / np.sqrt(np.maximum(w, 1e-300)))
    M = sym2(mul2(Ri, mul2(Q, Ri)))
    L = fun2(M, lambda w: np.log(np.maximum(w, 1e-300)))
    return sym2(mul2(R, mul2(L, R)))


def exp2_map(P, V):
    """Stacked spd_exp at time 1 for tangent stacks V."""
    R = fun2(P, np.sqrt)
    Ri = fun2(P, lambda w: 1.0 / np.sqrt(np.maximum(w, 1e-300)))
    inner = fun2(sym2(mul2(Ri, mul2(V, Ri))), np.exp)
    return sym2(mul2(R, mul2(inner, R)))
