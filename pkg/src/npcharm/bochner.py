"""Finite-difference verification of the flat-target Bochner-type
identities on C^2, plus curvature-sign probes for P(n).

Maps u: C^2 -> C^m are given by polynomial generators in
(z1, z1bar, z2, z2bar), so every discrete quantity can be checked against
exact derivatives and re-evaluated at any mesh.  Differential forms are
stored as dictionaries {sorted index tuple -> complex coefficient array}
over the basis order (dz1, dz2, dz1bar, dz2bar).

Conventions (fixed once, here): the Euclidean Kahler form is
omega = (i/2)(dz1 ^ dz1bar + dz2 ^ dz2bar), the basis 4-form
dz1 ^ dz2 ^ dz1bar ^ dz2bar equals 4 dvol, and for a (1,1)-form
phi = phi_ab dz^a ^ dzbar^b the pointwise quantities are
|phi|^2 = sum |phi_ab|^2 and tr phi = phi_11 + phi_22, normalized so that
-{phi, phi} = 4 (|phi|^2 - |tr phi|^2) dvol holds exactly.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .rng import subrng

DZ1, DZ2, DZB1, DZB2 = 0, 1, 2, 3
_CONJ = {DZ1: DZB1, DZ2: DZB2, DZB1: DZ1, DZB2: DZ2}
# derivative index -> (x axis, y axis, sign of i dy): D_z = (dx - i dy)/2
_AXES = {DZ1: (0, 1, -1.0), DZ2: (2, 3, -1.0), DZB1: (0, 1, 1.0), DZB2: (2, 3, 1.0)}
VOLUME_KEY = (DZ1, DZ2, DZB1, DZB2)


# -- polynomial generators -------------------------------------------------------

@dataclass(frozen=True)
class PolyGenerator:
    """u(z1, z2) = sum over terms of coeff * z1^a z1bar^b z2^c z2bar^d."""

    terms: tuple  # ((a, b, c, d), coeff vector) pairs
    m: int

    @staticmethod
    def from_terms(terms):
        terms = tuple((tuple(int(p) for p in powers), np.atleast_1d(np.asarray(cf, dtype=complex)))
                      for powers, cf in terms)
        if not terms:
            raise DomainError("generator needs at least one term")
        m = len(terms[0][1])
        if any(len(cf) != m for _, cf in terms):
            raise DomainError("all coefficient vectors must share one length")
        return PolyGenerator(terms, m)

    def __call__(self, X):
        """Evaluate at real coordinates X of shape (..., 4) -> (..., m)."""
        X = np.asarray(X, dtype=float)
        z1 = X[..., 0] + 1j * X[..., 1]
        z2 = X[..., 2] + 1j * X[..., 3]
        out = np.zeros(X.shape[:-1] + (self.m,), dtype=complex)
        for (a, b, c, d), cf in self.terms:
            mono = (z1**a) * (np.conj(z1) ** b) * (z2**c) * (np.conj(z2) ** d)
            out += mono[..., None] * cf
        return out

    def derivative(self, k):
        """Formal derivative with respect to z1, z2, z1bar or z2bar."""
        pos = {DZ1: 0, DZB1: 1, DZ2: 2, DZB2: 3}[k]
        terms = []
        for powers, cf in self.terms:
            if powers[pos] == 0:
                continue
            new = list(powers)
            new[pos] -= 1
            terms.append((tuple(new), powers[pos] * cf))
        if not terms:
            terms = [((0, 0, 0, 0), np.zeros(self.m, dtype=complex))]
        return PolyGenerator(tuple(terms), self.m)

    def conj(self):
        terms = tuple(((b, a, d, c), np.conj(cf)) for (a, b, c, d), cf in self.terms)
        return PolyGenerator(terms, self.m)

    def to_json(self):
        return {
            "m": self.m,
            "terms": [
                {
                    "powers": list(p),
                    "coeff": [[float(z.real), float(z.imag)] for z in cf],
                }
                for p, cf in self.terms
            ],
        }

    @staticmethod
    def from_json(doc):
        terms = [
            (tuple(t["powers"]), [complex(re, im) for re, im in t["coeff"]])
            for t in doc["terms"]
        ]
        return PolyGenerator.from_terms(terms)


@dataclass
class TestMap:
    """Generator sampled over the box [-1,1]^4 at mesh cells per axis.

    The residual sample nodes are fixed lattice points independent of the
    mesh, so maps at mesh h and h/2 are evaluated at the same nodes.
    """

    generator: PolyGenerator
    mesh: int = 32

    def __post_init__(self):
        if self.mesh < 8:
            raise DomainError("mesh too coarse: need at least 8 cells per axis")

    @property
    def h(self):
        return 2.0 / self.mesh

    def refined(self):
        return TestMap(self.generator, self.mesh * 2)

    def sample_nodes(self):
        xs = np.array([-0.6, -0.2, 0.2, 0.6])
        planes = [(0.1, -0.3), (-0.45, 0.35)]
        nodes = []
        for x2, y2 in planes:
            for x1 in xs:
                for y1 in xs:
                    nodes.append((x1, y1, x2, y2))
        return np.array(nodes)


@dataclass
class ResidualReport:
    residual_h: float
    residual_half_h: float
    observed_order: float | None


def _order(res_h, res_half, floor=1e-13):
    if res_h <= 10.0 * floor or res_half <= 0:
        return None
    return float(np.log2(res_h / res_half))


# -- form algebra -----------------------------------------------------------------

def wedge_key(key_a, key_b):
    """Canonical sorted key and sign for e_{key_a} ^ e_{key_b} (or None)."""
    merged = list(key_a) + list(key_b)
    if len(set(merged)) != len(merged):
        return None, 0
    sign = 1
    arr = merged[:]
    for i in range(len(arr)):
        for j in range(len(arr) - 1 - i):
            if arr[j] > arr[j + 1]:
                arr[j], arr[j + 1] = arr[j + 1], arr[j]
                sign = -sign
    return tuple(arr), sign


def form_conj(form):
    """Complex conjugate: conjugate coefficients, bar the basis vectors."""
    out = {}
    for key, coef in form.items():
        mapped = tuple(_CONJ[k] for k in key)
        canon, sign = wedge_key(mapped, ())
        out[canon] = out.get(canon, 0) + sign * np.conj(coef)
    return out


def form_add(a, b, scale=1.0):
    out = dict(a)
    for key, coef in b.items():
        out[key] = out.get(key, 0) + scale * coef
    return out


def form_max_abs(form):
    vals = [np.max(np.abs(c)) for c in form.values() if np.size(c)]
    return float(max(vals)) if vals else 0.0


def bracket(psi, xi):
    """{psi, xi} = sum_i psi_i ^ conj(xi_i) with the flat Hermitian pairing.

    psi and xi map form keys to (N, m) arrays; the result maps keys to
    (N,) scalar arrays.
    """
    xb = form_conj(xi)
    out = {}
    for ka, ca in psi.items():
        for kb, cb in xb.items():
            key, sign = wedge_key(ka, kb)
            if key is None:
                continue
            val = sign * np.sum(ca * cb, axis=-1)
            out[key] = out.get(key, 0) + val
    return out


# -- finite differences ------------------------------------------------------------

def cderiv_vec(fn, X, h, k):
    """Central complex derivative D_k of a vector field fn: X -> (N, m)."""
    xa, ya, s = _AXES[k]
    ex = np.zeros(4)
    ex[xa] = h
    ey = np.zeros(4)
    ey[ya] = h
    dx = (fn(X + ex) - fn(X - ex)) / (2.0 * h)
    dy = (fn(X + ey) - fn(X - ey)) / (2.0 * h)
    return 0.5 * (dx + s * 1j * dy)


def cderiv_form(fn, X, h, k):
    """Coefficient-wise D_k of a form field fn: X -> {key: array}."""
    xa, ya, s = _AXES[k]
    ex = np.zeros(4)
    ex[xa] = h
    ey = np.zeros(4)
    ey[ya] = h
    fxp, fxm, fyp, fym = fn(X + ex), fn(X - ex), fn(X + ey), fn(X - ey)
    keys = set(fxp) | set(fxm) | set(fyp) | set(fym)
    out = {}
    for key in keys:
        zero = 0.0
        dx = (fxp.get(key, zero) - fxm.get(key, zero)) / (2.0 * h)
        dy = (fyp.get(key, zero) - fym.get(key, zero)) / (2.0 * h)
        out[key] = 0.5 * (dx + s * 1j * dy)
    return out


def wedge_left(k, form):
    """dz^k ^ form."""
    out = {}
    for key, coef in form.items():
        canon, sign = wedge_key((k,), key)
        if canon is None:
            continue
        out[canon] = out.get(canon, 0) + sign * coef
    return out


def exterior_fd(fn, X, h, holomorphic):
    """Discrete Dolbeault operator applied to a form field closure."""
    ks = (DZ1, DZ2) if holomorphic else (DZB1, DZB2)
    out = {}
    for k in ks:
        out = form_add(out, wedge_left(k, cderiv_form(fn, X, h, k)))
    return out


def fd_forms(test_map, X=None):
    """Discrete 1-forms of u at the sample nodes: du (1,0), dbar u (0,1),
    and the same for ubar; computed by central differences."""
    tm = test_map
    X = tm.sample_nodes() if X is None else X
    u, ub = tm.generator, tm.generator.conj()
    h = tm.h
    return {
        "partial_u": {(DZ1,): cderiv_vec(u, X, h, DZ1), (DZ2,): cderiv_vec(u, X, h, DZ2)},
        "dbar_u": {(DZB1,): cderiv_vec(u, X, h, DZB1), (DZB2,): cderiv_vec(u, X, h, DZB2)},
        "partial_ubar": {(DZ1,): cderiv_vec(ub, X, h, DZ1), (DZ2,): cderiv_vec(ub, X, h, DZ2)},
        "dbar_ubar": {(DZB1,): cderiv_vec(ub, X, h, DZB1), (DZB2,): cderiv_vec(ub, X, h, DZB2)},
    }


def analytic_forms(test_map, X=None):
    """Same 1-forms from the exact derivatives of the generator."""
    tm = test_map
    X = tm.sample_nodes() if X is None else X
    u, ub = tm.generator, tm.generator.conj()
    return {
        "partial_u": {(DZ1,): u.derivative(DZ1)(X), (DZ2,): u.derivative(DZ2)(X)},
        "dbar_u": {(DZB1,): u.derivative(DZB1)(X), (DZB2,): u.derivative(DZB2)(X)},
        "partial_ubar": {(DZ1,): ub.derivative(DZ1)(X), (DZ2,): ub.derivative(DZ2)(X)},
        "dbar_ubar": {(DZB1,): ub.derivative(DZB1)(X), (DZB2,): ub.derivative(DZB2)(X)},
    }


def _form4_residual(tm):
    X = tm.sample_nodes()
    disc = fd_forms(tm, X)
    exact = analytic_forms(tm, X)
    r1 = form_max_abs(
        form_add(bracket(disc["partial_u"], disc["partial_u"]),
                 bracket(exact["dbar_ubar"], exact["dbar_ubar"]))
    )
    r2 = form_max_abs(
        form_add(bracket(disc["partial_ubar"], disc["partial_ubar"]),
                 bracket(exact["dbar_u"], exact["dbar_u"]))
    )
    return max(r1, r2)


def check_form4(test_map):
    """Residual of {du,du} = -{dbar ubar, dbar ubar} (and its mirror),
    discrete forms against the exact ones, under one mesh halving."""
    res_h = _form4_residual(test_map)
    res_half = _form4_residual(test_map.refined())
    return ResidualReport(res_h, res_half, _order(res_h, res_half))


def _commutation_residual(tm):
    X = tm.sample_nodes()
    u = tm.generator
    h = tm.h

    def dbar_u_exact(Xq):
        return {(DZB1,): u.derivative(DZB1)(Xq), (DZB2,): u.derivative(DZB2)(Xq)}

    def partial_u_exact(Xq):
        return {(DZ1,): u.derivative(DZ1)(Xq), (DZ2,): u.derivative(DZ2)(Xq)}

    A = exterior_fd(dbar_u_exact, X, h, holomorphic=True)      # del (dbar u)
    B = exterior_fd(partial_u_exact, X, h, holomorphic=False)  # dbar (del u)
    r1 = form_max_abs(form_add(A, B))                          # antisymmetry
    r2 = form_max_abs(exterior_fd(partial_u_exact, X, h, holomorphic=True))  # del del u = 0
    return max(r1, r2)


def check_commutation(test_map):
    """Residuals of del_E dbar u = -dbar_E del u and del_E del u = 0 with
    the discrete exterior derivative applied to exact 1-forms."""
    res_h = _commutation_residual(test_map)
    res_half = _commutation_residual(test_map.refined())
    return ResidualReport(res_h, res_half, _order(res_h, res_half))


# -- the flat Bochner identities -----------------------------------------------------

def as_volume_multiple(form):
    """Coefficient lambda with form = lambda * dvol (top-degree forms).

    dz1 ^ dz2 ^ dz1bar ^ dz2bar = 4 dvol in real coordinates.
    """
    coef = form.get(VOLUME_KEY, None)
    if coef is None:
        return 0.0
    return 4.0 * coef


def _phi_components(tm, X):
    """phi = del_E dbar u by nested central differences; keys (a, bbar)."""
    u = tm.generator
    h = tm.h
    phi = {}
    for a in (DZ1, DZ2):
        for b in (DZB1, DZB2):
            phi[(a, b)] = cderiv_vec(lambda Xq, bb=b: cderiv_vec(u, Xq, h, bb), X, h, a)
    return phi


def _phi_invariants(phi):
    """(|phi|^2, |tr phi|^2) pointwise under the calibrated flat norms."""
    norm_sq = sum(np.sum(np.abs(c) ** 2, axis=-1) for c in phi.values())
    tr = phi[(DZ1, DZB1)] + phi[(DZ2, DZB2)]
    return norm_sq, np.sum(np.abs(tr) ** 2, axis=-1)


@dataclass
class SiuReport:
    original: ResidualReport
    modified: ResidualReport
    factor_two: ResidualReport

    @property
    def factor_two_defect(self):
        return self.factor_two.residual_h


def _siu_residuals(tm):
    X = tm.sample_nodes()
    u = tm.generator
    h = tm.h

    def dbar_u(Xq):
        return {(DZB1,): cderiv_vec(u, Xq, h, DZB1), (DZB2,): cderiv_vec(u, Xq, h, DZB2)}

    def partial_u(Xq):
        return {(DZ1,): cderiv_vec(u, Xq, h, DZ1), (DZ2,): cderiv_vec(u, Xq, h, DZ2)}

    def bracket_dbar(Xq):
        f = dbar_u(Xq)
        return bracket(f, f)

    # del dbar {dbar u, dbar u}
    lhs1 = as_volume_multiple(
        exterior_fd(lambda Xq: exterior_fd(bracket_dbar, Xq, h, holomorphic=False), X, h, holomorphic=True)
    )
    phi = _phi_components(tm, X)
    norm_sq, tr_sq = _phi_invariants(phi)
    rhs1 = 4.0 * (norm_sq - tr_sq)
    res1 = float(np.max(np.abs(lhs1 - rhs1)))

    def mixed_bracket(Xq):
        # {dbar_E del u, dbar u - del u}
        dbar_del = exterior_fd(partial_u, Xq, h, holomorphic=False)
        diff = form_add(dbar_u(Xq), partial_u(Xq), scale=-1.0)
        return bracket(dbar_del, diff)

    d_of = form_add(
        exterior_fd(mixed_bracket, X, h, holomorphic=True),
        exterior_fd(mixed_bracket, X, h, holomorphic=False),
    )
    lhs2 = as_volume_multiple(d_of)
    rhs2 = 8.0 * (norm_sq - tr_sq)
    res2 = float(np.max(np.abs(lhs2 - rhs2)))
    factor2 = float(np.max(np.abs(lhs2 - 2.0 * lhs1)))
    return res1, res2, factor2


def siu_residual_flat(test_map):
    """Flat-target Bochner residuals.

    Original identity: del dbar {dbar u, dbar u} = 4 (|phi|^2 - |tr phi|^2) dvol
    with phi = del_E dbar u (the trace term vanishes for harmonic u).
    Modified identity: d {dbar_E del u, dbar u - del u} = twice that.
    Both sides are discrete, so the residuals measure the O(h^2) failure
    of the discrete Leibniz rule and vanish under mesh refinement.
    """
    r1h, r2h, f2h = _siu_residuals(test_map)
    fine = test_map.refined()
    r1f, r2f, f2f = _siu_residuals(fine)
    return SiuReport(
        original=ResidualReport(r1h, r1f, _order(r1h, r1f)),
        modified=ResidualReport(r2h, r2f, _order(r2h, r2f)),
        factor_two=ResidualReport(f2h, f2f, _order(f2h, f2f)),
    )


# -- curvature sign probes -------------------------------------------------------------

def sym_basis(n):
    """Orthonormal basis of symmetric matrices under <V,W> = tr(VW)."""
    basis = []
    for i in range(n):
        E = np.zeros((n, n))
        E[i, i] = 1.0
        basis.append(E)
    for i in range(n):
        for j in range(i + 1, n):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0 / np.sqrt(2.0)
            basis.append(E)
    return basis


def spd_curvature(X, Y, Z):
    """R(X, Y)Z = -1/4 [[X, Y], Z] at the identity of P(n)."""
    B = X @ Y - Y @ X
    return -0.25 * (B @ Z - Z @ B)


def sectional_curvature_algebraic(X, Y):
    """<R(X,Y)Y, X> at e (inner product tr(VW))."""
    return float(np.trace(spd_curvature(X, Y, Y) @ X).real)


def sectional_curvature_measured(X, Y, t=1e-2):
    """Distance-based sectional estimate via
    d^2(exp(tX), exp(tY)) = t^2 |X-Y|^2 - (t^4/3) <R(X,Y)Y,X> + O(t^6)."""
    from .spd import spd_distance, sym_exp

    d2 = spd_distance(sym_exp(t * X), sym_exp(t * Y)) ** 2
    flat = t**2 * float(np.trace((X - Y) @ (X - Y)))
    return 3.0 * (flat - d2) / t**4


def curvature_convention_defect(n=2, samples=5, seed=0):
    """max |measured - algebraic| sectional curvature over random planes;
    pins the sign and the -1/4 normalization of spd_curvature."""
    worst = 0.0
    for i in range(samples):
        rng = subrng(seed, i)
        X = rng.standard_normal((n, n))
        X = 0.5 * (X + X.T)
        Y = rng.standard_normal((n, n))
        Y = 0.5 * (Y + Y.T)
        worst = max(
            worst,
            abs(sectional_curvature_measured(X, Y) - sectional_curvature_algebraic(X, Y)),
        )
    return worst


def hermitian_value(A, basis):
    """sum_{s,t} lam_s lam_t <R(W_s, conj(W_t)) W_t, conj(W_s)> for
    Hermitian PSD A expanded in the given tangent basis."""
    lam, W = np.linalg.eigh(A)
    m = len(basis)
    tangents = [sum(W[i, s] * basis[i] for i in range(m)) for s in range(m)]
    total = 0.0 + 0.0j
    for s in range(m):
        if lam[s] <= 1e-15:
            continue
        for t in range(m):
            if lam[t] <= 1e-15:
                continue
            Ws, Wt = tangents[s], tangents[t]
            val = np.trace(spd_curvature(Ws, np.conj(Wt), Wt) @ np.conj(Ws))
            total += lam[s] * lam[t] * val
    if abs(total.imag) > 1e-9 * max(1.0, abs(total.real)):
        raise DomainError(f"Hermitian curvature value is not real: {total}")
    return float(total.real)


def hermitian_negativity_probe(n, samples, rng_seed=0):
    """Max of the curvature form over random Hermitian PSD matrices
    A = B B^H on the tangent space of P(n) at e; nonpositive when P(n)
    has Hermitian-negative curvature."""
    if n > 4:
        raise DomainError("probe supports n <= 4")
    if samples < 1:
        raise DomainError("samples must be >= 1")
    basis = sym_basis(n)
    m = len(basis)
    worst = -np.inf
    for i in range(samples):
        rng = subrng(rng_seed, i)
        B = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        A = B @ B.conj().T
        worst = max(worst, hermitian_value(A, basis))
    return float(worst)
