"""Discrete equivariant harmonic sections on the half-cylinder [0,T] x S^1.

The cylinder is the conformal model of the punctured disk under
r = e^(-t); two-dimensional energy is conformally invariant, so the flat
metric dt^2 + dtheta^2 reproduces the punctured-disk energy.  A section stores one fundamental domain
theta in [0, 2pi) and applies the twist isometry across the seam, so
equivariance holds exactly by representation.

Energy convention: sum over grid cells of
(d^2(up-edge)/h_t^2 + d^2(theta-edge)/h_theta^2) * h_t * h_theta,
calibrated so the helical section of a twist with translation length D
has energy (D^2 / 2pi) * T over [0,T], matching the minimal loop energy
E = D^2 / 2pi per unit cylinder length.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError, UnsupportedSpace
from .isometries import (
    IsometryDescriptor,
    classify_isometry,
    decay_ray,
    displacement_minimizer,
    min_energy_constant,
)
from .kernels import kernel_for, raw_copy, raw_take_rows
from .rng import subrng
from .spaces import MetricTree, distance, interp
from .tree import TreePoint

LOG2 = float(np.log(2.0))

# every section produced by the module registers its lower-bound data here
LOWER_BOUND_REGISTRY = []


@dataclass(frozen=True)
class CylinderGrid:
    T: float
    n_t: int
    n_theta: int

    def __post_init__(self):
        if self.T <= 0 or self.n_t < 1:
            raise DomainError("need T > 0 and n_t >= 1")
        if self.n_theta < 8:
            raise DomainError("n_theta must be >= 8")
        aspect = self.h_t / self.h_theta
        if not (0.25 <= aspect <= 4.0):
            raise DomainError(f"grid aspect h_t/h_theta = {aspect:.3f} outside [0.25, 4]")

    @property
    def h_t(self):
        return self.T / self.n_t

    @property
    def h_theta(self):
        return 2.0 * np.pi / self.n_theta

    @property
    def ts(self):
        return np.linspace(0.0, self.T, self.n_t + 1)

    @property
    def thetas(self):
        return np.arange(self.n_theta) * self.h_theta


class CylinderSection:
    """Grid of target-space points with a twist across the theta seam."""

    def __init__(self, grid, space, twist, values):
        self.grid = grid
        self.space = space
        self.twist = twist
        self.kernel = kernel_for(space)
        self.values = values  # raw stack, leading shape (n_t+1, n_theta)

    def copy(self):
        return CylinderSection(self.grid, self.space, self.twist, raw_copy(self.values))

    def point(self, i, j):
        return self.kernel.to_point(raw_take_rows(self.values, (i, j)))

    def seam_values(self, rows=None):
        """Values at theta = 2pi (twist applied to column 0)."""
        sl = slice(None) if rows is None else rows
        col0 = raw_take_rows(self.values, (sl, 0))
        return self.twist.apply_raw(self.kernel, col0)

    def theta_closed_rows(self):
        """Row stacks extended by the seam value, shape (rows, n_theta + 1, ...)."""
        seam = self.seam_values()
        if isinstance(self.values, tuple):
            e = np.concatenate([self.values[0], seam[0][:, None]], axis=1)
            o = np.concatenate([self.values[1], seam[1][:, None]], axis=1)
            return (e, o)
        return np.concatenate([self.values, seam[:, None]], axis=1)

    def restrict(self, n_rows):
        """Restriction to the first n_rows cells, i.e. t in [0, n_rows * h_t]."""
        if n_rows >= self.grid.n_t:
            return self.copy()
        sub = CylinderGrid(n_rows * self.grid.h_t, n_rows, self.grid.n_theta)
        return CylinderSection(sub, self.space, self.twist, raw_copy(raw_take_rows(self.values, slice(0, n_rows + 1))))

    def sup_distance(self, other):
        return float(np.max(self.kernel.dist(self.values, other.values)))

    def row_loop_energies(self):
        """Per-row theta-circle energy sum_j d^2 / h_theta (all n_t + 1 rows)."""
        closed = self.theta_closed_rows()
        a = raw_take_rows(closed, (slice(None), slice(0, self.grid.n_theta)))
        b = raw_take_rows(closed, (slice(None), slice(1, self.grid.n_theta + 1)))
        d2 = self.kernel.dist2(a, b)
        return d2.sum(axis=1) / self.grid.h_theta

    def radial_energies(self):
        """Per-cell-row radial energy sum_j d^2(u_i, u_{i+1}) / h_t^2 * h_t * h_theta."""
        a = raw_take_rows(self.values, slice(0, self.grid.n_t))
        b = raw_take_rows(self.values, slice(1, self.grid.n_t + 1))
        d2 = self.kernel.dist2(a, b)
        return d2.sum(axis=1) * self.grid.h_theta / self.grid.h_t

    def lipschitz_bound(self):
        """max over grid edges of d/h."""
        a = raw_take_rows(self.values, slice(0, self.grid.n_t))
        b = raw_take_rows(self.values, slice(1, self.grid.n_t + 1))
        dt = np.sqrt(np.max(self.kernel.dist2(a, b))) / self.grid.h_t if self.grid.n_t else 0.0
        closed = self.theta_closed_rows()
        a = raw_take_rows(closed, (slice(None), slice(0, self.grid.n_theta)))
        b = raw_take_rows(closed, (slice(None), slice(1, self.grid.n_theta + 1)))
        dth = np.sqrt(np.max(self.kernel.dist2(a, b))) / self.grid.h_theta
        return float(max(dt, dth))


def _register_lower_bound(section, e_rho):
    rows = section.row_loop_energies()[: section.grid.n_t]
    LOWER_BOUND_REGISTRY.append(
        {
            "min_row_loop_energy": float(rows.min()) if len(rows) else 0.0,
            "e_rho": float(e_rho),
            "h_theta": section.grid.h_theta,
        }
    )


def discrete_energy(section, window=None):
    """Energy of the section over the window (t1, t2) (whole range if None).

    Cells are attributed to [t_i, t_{i+1}); a cell contributes its radial
    edge and its theta edge at the lower row.
    """
    g = section.grid
    if window is None:
        lo, hi = 0.0, g.T
    else:
        lo, hi = window
        if hi <= lo:
            return 0.0
    ts = g.ts
    rows = [i for i in range(g.n_t) if ts[i] >= lo - 1e-9 and ts[i + 1] <= hi + 1e-9]
    if not rows:
        return 0.0
    sl = slice(rows[0], rows[-1] + 1)
    a = raw_take_rows(section.values, sl)
    b = raw_take_rows(section.values, slice(rows[0] + 1, rows[-1] + 2))
    rad = section.kernel.dist2(a, b).sum() * g.h_theta / g.h_t
    loop = section.row_loop_energies()[sl]
    return float(rad + loop.sum() * g.h_t)


# -- prototype sections ---------------------------------------------------------

def _ray_family(twist, t_max):
    """s -> base point c(s) of the equivariant chord family.

    Semisimple twists use a displacement minimizer (constant family);
    parabolic ones ride the decay ray.
    """
    cls = classify_isometry(twist)
    if cls != "parabolic":
        p_star = displacement_minimizer(twist)
        return lambda s: p_star
    from .spaces import Hyperbolic2, SpdManifold

    if isinstance(twist.space, SpdManifold):
        ray, _ = decay_ray(twist.payload, t_max=max(5.0, (t_max) ** (1.0 / 3.0) + 2.0), steps=64)
        return lambda s: ray(s)
    if isinstance(twist.space, Hyperbolic2):
        from .isometries import h2_decay_ray

        ray = h2_decay_ray(twist.payload.matrix)
        return lambda s: ray(s)
    raise UnsupportedSpace("parabolic prototype sections need SPD or hyperbolic targets")


def chord_loop(twist, s=0.0, reparam=None, ray=None):
    """Equivariant loop theta -> point on the geodesic chord from c(s) to
    I(c(s)); optional reparam(theta) shifts the affine parameter."""
    base = ray(s) if ray is not None else _ray_family(twist, max(s, 1.0))(s)
    end = twist.apply(base)

    def loop(theta):
        g = theta + (reparam(theta) if reparam is not None else 0.0)
        k, g0 = divmod(g, 2.0 * np.pi)
        val = interp(twist.space, base, end, g0 / (2.0 * np.pi))
        for _ in range(int(round(k))):
            val = twist.apply(val)
        for _ in range(int(round(-k))):
            val = twist.inverse().apply(val)
        return val

    return loop


def prototype_section(twist, boundary_loop, grid):
    """Lipschitz quasi-minimizing section: boundary data bridged into the
    equivariant chord family gamma_{s(t)} with the crawl schedule
    s(t) = (t - log 2)^(1/3) for t >= log 2."""
    space = twist.space
    kern = kernel_for(space)
    seam_gap = distance(space, boundary_loop(2.0 * np.pi), twist.apply(boundary_loop(0.0)))
    if seam_gap > 1e-8:
        raise DomainError(f"boundary loop does not close up to the twist (gap {seam_gap:.2e})")
    fam = _ray_family(twist, grid.T)
    thetas = grid.thetas
    frac = thetas / (2.0 * np.pi)

    def family_row(s):
        base, end = fam(s), twist.apply(fam(s))
        A = kern.stack([base] * grid.n_theta)
        B = kern.stack([end] * grid.n_theta)
        return kern.interp(A, B, frac)

    boundary_row = kern.stack([boundary_loop(th) for th in thetas])
    values = kern.empty((grid.n_t + 1, grid.n_theta))
    gamma0 = family_row(0.0)
    for i, t in enumerate(grid.ts):
        if t >= LOG2:
            row = family_row((t - LOG2) ** (1.0 / 3.0))
        elif t <= 0.0:
            row = boundary_row
        else:
            row = kern.interp(boundary_row, gamma0, t / LOG2)
        _assign_row(values, i, row)
    section = CylinderSection(grid, space, twist, values)
    _register_lower_bound(section, min_energy_constant(twist))
    return section


def _assign_row(values, i, row):
    if isinstance(values, tuple):
        values[0][i] = row[0]
        values[1][i] = row[1]
    else:
        values[i] = row


# -- relaxation ------------------------------------------------------------------

def _neighbor_stacks(section, rows):
    """up, down, left, right stacks for the given interior row slice."""
    v = section.values
    kern = section.kernel
    twist = section.twist
    up = raw_take_rows(v, slice(rows.start - 1, rows.stop - 1))
    down = raw_take_rows(v, slice(rows.start + 1, rows.stop + 1))
    mid = raw_take_rows(v, rows)

    def roll_cols(raw, shift):
        if isinstance(raw, tuple):
            return (np.roll(raw[0], shift, axis=1), np.roll(raw[1], shift, axis=1))
        return np.roll(raw, shift, axis=1)

    left = roll_cols(mid, 1)
    right = roll_cols(mid, -1)
    # seam transport: left neighbor of column 0 lives one twist below,
    # right neighbor of the last column one twist above
    last = raw_take_rows(mid, (slice(None), -1))
    first = raw_take_rows(mid, (slice(None), 0))
    inv = twist.inverse().apply_raw(kern, last)
    fwd = twist.apply_raw(kern, first)
    if isinstance(v, tuple):
        left[0][:, 0], left[1][:, 0] = inv
        right[0][:, -1], right[1][:, -1] = fwd
    else:
        left[:, 0] = inv
        right[:, -1] = fwd
    return mid, up, down, left, right


def _local_energy(kern, x, nbrs, w_t, w_th):
    up, down, left, right = nbrs
    return (
        w_t * (kern.dist2(x, up) + kern.dist2(x, down))
        + w_th * (kern.dist2(x, left) + kern.dist2(x, right))
    )


def relax_dirichlet(
    grid,
    twist,
    boundary_t0,
    boundary_tT,
    init,
    tol=1e-9,
    max_sweeps=60000,
    karcher_iters=1,
    energy_check_every=50,
):
    """Red-black sweeps replacing each interior value by the weighted
    barycenter of its four neighbors (twist-transported across the seam).

    Each node move is guarded: a candidate is accepted only if it does not
    increase the node's local energy, so the total energy is non-increasing
    across every sweep.  Terminates when the largest node movement falls
    below tol; raises ConvergenceError otherwise.
    """
    space = twist.space
    kern = kernel_for(space)
    section = init.copy() if isinstance(init, CylinderSection) else init
    v = section.values
    thetas = grid.thetas
    _assign_row(v, 0, kern.stack([boundary_t0(th) for th in thetas]))
    _assign_row(v, grid.n_t, kern.stack([boundary_tT(th) for th in thetas]))
    if grid.n_t < 2:
        return section, {"sweeps": 0, "energy_history": [discrete_energy(section)], "converged": True}

    w_t = 1.0 / grid.h_t**2
    w_th = 1.0 / grid.h_theta**2
    lam = w_th / (w_t + w_th)
    weights = [w_t, w_t, w_th, w_th]
    rows = slice(1, grid.n_t)
    ii, jj = np.meshgrid(np.arange(1, grid.n_t), np.arange(grid.n_theta), indexing="ij")
    color_masks = [((ii + jj) % 2 == c) for c in (0, 1)]
    energy_history = [discrete_energy(section)]
    last_energy = energy_history[0]
    converged = False
    sweeps_done = 0
    for sweep in range(max_sweeps):
        max_move = 0.0
        for mask in color_masks:
            mid, up, down, left, right = _neighbor_stacks(section, rows)
            m_t = kern.interp(up, down, 0.5)
            m_th = kern.interp(left, right, 0.5)
            cand = kern.interp(m_t, m_th, lam)
            if karcher_iters and not isinstance(space, MetricTree):
                cand = kern.weighted_mean(
                    [up, down, left, right], weights, init=cand, iters=karcher_iters
                )
            elif isinstance(space, MetricTree):
                cand = kern.weighted_mean([up, down, left, right], weights, init=cand)
            f_old = _local_energy(kern, mid, (up, down, left, right), w_t, w_th)
            f_new = _local_energy(kern, cand, (up, down, left, right), w_t, w_th)
            accept = mask & (f_new <= f_old + 1e-14 * (1.0 + np.abs(f_old)))
            move = np.where(accept, kern.dist(mid, cand), 0.0)
            max_move = max(max_move, float(move.max()) if move.size else 0.0)
            new_mid = _masked_merge(accept, cand, mid)
            _store_rows(v, rows, new_mid)
        sweeps_done = sweep + 1
        if sweeps_done % energy_check_every == 0:
            e = discrete_energy(section)
            if e > last_energy + 1e-9 * (1.0 + abs(last_energy)):
                raise ConvergenceError(
                    f"energy increased across sweeps ({last_energy} -> {e})",
                    last=section,
                    history=energy_history,
                )
            last_energy = e
            energy_history.append(e)
        if max_move < tol:
            converged = True
            break
    energy_history.append(discrete_energy(section))
    if not converged:
        raise ConvergenceError(
            f"relaxation did not converge in {max_sweeps} sweeps (last move {max_move:.3e})",
            last=section,
            history=energy_history,
        )
    _register_lower_bound(section, min_energy_constant(twist))
    return section, {
        "sweeps": sweeps_done,
        "energy_history": energy_history,
        "converged": converged,
    }


def _masked_merge(mask, a, b):
    if isinstance(a, tuple):
        return (np.where(mask, a[0], b[0]), np.where(mask, a[1], b[1]))
    m = mask
    while m.ndim < a.ndim:
        m = m[..., None]
    return np.where(m, a, b)


def _store_rows(values, rows, new_rows):
    if isinstance(values, tuple):
        values[0][rows] = new_rows[0]
        values[1][rows] = new_rows[1]
    else:
        values[rows] = new_rows


# -- exhaustion solver ------------------------------------------------------------

@dataclass
class SolveParams:
    T0: float = 10.0
    doublings: int = 2
    n_theta: int = 64
    dt: float | None = None  # target radial step; default 2 * h_theta
    cauchy_tol: float = 1e-6
    sweep_tol: float = 1e-9
    max_sweeps: int = 60000
    karcher_iters: int = 1
    seed: int = 0

    def base_grid(self):
        dt = self.dt if self.dt is not None else 4.0 * np.pi / self.n_theta
        n_t = max(2, int(round(self.T0 / dt)))
        return CylinderGrid(self.T0, n_t, self.n_theta)


def _init_section(mode, proto, boundary_t0, boundary_tT, seed):
    """Initial iterate: the prototype, a random perturbation of it, or a
    constant section bridged to the boundary rows."""
    grid, kern, space = proto.grid, proto.kernel, proto.space
    if mode == "prototype":
        return proto.copy()
    if mode == "random":
        out = proto.copy()
        rng = subrng(seed, 7001)
        for i in range(1, grid.n_t):
            for j in range(grid.n_theta):
                p = out.point(i, j)
                q = _random_nudge(space, p, rng, 0.2)
                _set_node(out, i, j, q)
        return out
    if mode == "constant":
        out = proto.copy()
        anchor = boundary_t0(0.0)
        bridge = max(1.0, 2.0 * grid.h_t)
        for i in range(1, grid.n_t):
            t = grid.ts[i]
            lam_lo = min(1.0, t / bridge)
            lam_hi = min(1.0, (grid.T - t) / bridge)
            for j in range(grid.n_theta):
                base = interp(space, boundary_t0(grid.thetas[j]), anchor, lam_lo)
                val = interp(space, boundary_tT(grid.thetas[j]), base, lam_hi)
                _set_node(out, i, j, val)
        return out
    raise DomainError(f"unknown init mode {mode!r}")


def _random_nudge(space, p, rng, scale):
    from .spaces import random_point

    q = random_point(space, rng)
    return interp(space, p, q, min(1.0, scale * rng.random()))


def _set_node(section, i, j, p):
    raw = section.kernel.stack([p])
    if isinstance(section.values, tuple):
        section.values[0][i, j] = raw[0][0]
        section.values[1][i, j] = raw[1][0]
    else:
        section.values[i, j] = raw[0]


def solve_punctured_disk(twist, boundary_loop, params=None, init_mode="prototype"):
    """Dirichlet exhaustion: solve on T0, 2 T0, ..., far end pinned to the
    prototype slice, until restrictions to [0, T0] are Cauchy.

    Returns the deepest restriction and its energy profile; the restricted
    section carries the exhaustion history in `.cauchy_history`.
    """
    params = params or SolveParams()
    base = params.base_grid()
    e_rho = min_energy_constant(twist)
    restrictions = []
    cauchy = []
    prev_solution = None
    for level in range(params.doublings + 1):
        n_t = base.n_t * (2**level)
        grid = CylinderGrid(base.T * (2**level), n_t, params.n_theta)
        proto = prototype_section(twist, boundary_loop, grid)
        far = chord_loop(
            twist,
            s=(grid.T - LOG2) ** (1.0 / 3.0),
            ray=_ray_family(twist, grid.T),
        )
        if prev_solution is None:
            init = _init_section(init_mode, proto, boundary_loop, far, params.seed)
        else:
            init = proto.copy()
            _store_rows(
                init.values,
                slice(0, prev_solution.grid.n_t + 1),
                prev_solution.values,
            )
        section, info = relax_dirichlet(
            grid,
            twist,
            boundary_loop,
            far,
            init,
            tol=params.sweep_tol,
            max_sweeps=params.max_sweeps,
            karcher_iters=params.karcher_iters,
        )
        prev_solution = section
        r = section.restrict(base.n_t)
        if restrictions:
            cauchy.append(r.sup_distance(restrictions[-1]))
        restrictions.append(r)
    if cauchy and cauchy[-1] >= params.cauchy_tol:
        raise ConvergenceError(
            f"exhaustion restrictions not Cauchy at tol {params.cauchy_tol}",
            last=restrictions[-1],
            history=cauchy,
        )
    final = restrictions[-1]
    final.cauchy_history = cauchy
    profile = energy_growth_profile(final, e_rho)
    return final, profile


# -- diagnostics -------------------------------------------------------------------

@dataclass
class EnergyProfile:
    annuli: list
    slope_fit: float
    intercept: float
    e_rho: float
    bounded_defect: float
    modified_energy: float
    lower_bound_ok: bool


def energy_growth_profile(section, e_rho, window=1.0):
    """Per-annulus energies, fitted slope of cumulative energy, and the
    bounded-defect sup over windows of |energy - e_rho * length|.

    Window edges snap to grid rows so the annuli partition the cells
    exactly.
    """
    g = section.grid
    n_win = max(1, int(round(g.T / window)))
    idx = sorted({int(round(k * window / g.h_t)) for k in range(n_win + 1)} | {0, g.n_t})
    idx = [i for i in idx if 0 <= i <= g.n_t]
    edges = np.array([g.ts[i] for i in idx])
    annuli = []
    for k in range(len(edges) - 1):
        e = discrete_energy(section, (edges[k], edges[k + 1]))
        annuli.append((float(edges[k]), float(edges[k + 1]), float(e)))
    cum = np.concatenate([[0.0], np.cumsum([a[2] for a in annuli])])
    A = np.vstack([edges, np.ones_like(edges)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, cum, rcond=None)
    defect = max(abs(a[2] - e_rho * (a[1] - a[0])) for a in annuli)
    slack = 10.0 * g.h_theta**2
    ok = all(a[2] >= (e_rho - slack) * (a[1] - a[0]) for a in annuli)
    total = discrete_energy(section)
    return EnergyProfile(
        annuli=annuli,
        slope_fit=float(slope),
        intercept=float(intercept),
        e_rho=float(e_rho),
        bounded_defect=float(defect),
        modified_energy=float(total - e_rho * g.T),
        lower_bound_ok=bool(ok),
    )


@dataclass
class ThetaEnergyReport:
    values: list  # (t, F)
    delta_f: float
    decreasing_tail_ok: bool
    tail_start: float
    t_f_values: list
    t_f_ratio: float


def theta_energy_function(section, e_rho=None, tail_start=2.0):
    """F(t): theta-circle energy of each slice minus the minimal loop
    energy; reports tail monotonicity within the discretization slack and
    the trend of t * F(t)."""
    if e_rho is None:
        e_rho = min_energy_constant(section.twist)
    g = section.grid
    F = section.row_loop_energies() - e_rho
    ts = g.ts
    L = section.lipschitz_bound()
    delta_f = 3.0 * max(g.h_t, g.h_theta) ** 2 * L**2
    tail = ts >= tail_start - 1e-9
    idx = np.where(tail)[0]
    ok = True
    for a, b in zip(idx, idx[1:]):
        if F[b] > F[a] + delta_f:
            ok = False
    tf = ts * F
    i2 = int(np.argmin(np.abs(ts - tail_start)))
    ratio = float(abs(tf[-1]) / abs(tf[i2])) if abs(tf[i2]) > 0 else 0.0
    return ThetaEnergyReport(
        values=[(float(t), float(f)) for t, f in zip(ts, F)],
        delta_f=float(delta_f),
        decreasing_tail_ok=ok,
        tail_start=tail_start,
        t_f_values=[(float(t), float(v)) for t, v in zip(ts, tf)],
        t_f_ratio=ratio,
    )


@dataclass
class SublogReport:
    eps_constants: dict
    radial_constant: float
    max_d2: float


def sublog_growth_check(section, reference_point=None, eps_list=(1.0, 0.1, 0.01)):
    """Growth diagnostics: for each eps, the constant C_eps with
    d^2(u(t,.), ref) <= eps t + C_eps over the grid, plus the fitted C in
    the radial bound |du/dt|^2 <= C / t."""
    kern = section.kernel
    g = section.grid
    ref = reference_point if reference_point is not None else section.point(0, 0)
    ref_stack = kern.stack([ref] * g.n_theta)
    d2 = np.empty((g.n_t + 1, g.n_theta))
    for i in range(g.n_t + 1):
        d2[i] = kern.dist2(raw_take_rows(section.values, i), ref_stack)
    ts = g.ts[:, None]
    eps_constants = {
        float(eps): float(np.max(d2 - eps * ts)) for eps in eps_list
    }
    a = raw_take_rows(section.values, slice(0, g.n_t))
    b = raw_take_rows(section.values, slice(1, g.n_t + 1))
    rad_sq = kern.dist2(a, b) / g.h_t**2
    mid_ts = 0.5 * (g.ts[:-1] + g.ts[1:])
    mask = mid_ts >= 1.0
    radial_c = float(np.max(mid_ts[mask, None] * rad_sq[mask])) if mask.any() else 0.0
    return SublogReport(eps_constants=eps_constants, radial_constant=radial_c, max_d2=float(d2.max()))


@dataclass
class UniquenessReport:
    sup_distance: float
    subharmonic_defect: float
    converged: bool
    sections: list = field(default_factory=list)
    pair_distances: list = field(default_factory=list)


def _scalar_laplacian(f, grid):
    """Five-point Laplacian of a theta-periodic scalar grid field."""
    interior = (
        (f[:-2, :] + f[2:, :] - 2.0 * f[1:-1, :]) / grid.h_t**2
        + (np.roll(f, 1, axis=1)[1:-1] + np.roll(f, -1, axis=1)[1:-1] - 2.0 * f[1:-1, :])
        / grid.h_theta**2
    )
    return interior


def uniqueness_probe(twist, boundary_loop, seeds, params=None):
    """Solve per seed and compare: sup distance over the common grid and
    the worst interior discrete-Laplacian defect of d^2(u_i, u_j), which
    NPC subharmonicity keeps above -3 h^2 L^2."""
    if len(seeds) < 2:
        raise DomainError("need at least two seeds")
    params = params or SolveParams()
    sections = []
    for mode in seeds:
        section, _ = solve_punctured_disk(twist, boundary_loop, params, init_mode=mode)
        sections.append(section)
    sup = 0.0
    defect = np.inf
    pairs = []
    g = sections[0].grid
    for i in range(len(sections)):
        for j in range(i + 1, len(sections)):
            d = sections[i].kernel.dist(sections[i].values, sections[j].values)
            pairs.append(float(d.max()))
            sup = max(sup, pairs[-1])
            lap = _scalar_laplacian(d**2, g)
            if lap.size:
                defect = min(defect, float(lap.min()))
    return UniquenessReport(
        sup_distance=float(sup),
        subharmonic_defect=float(defect if np.isfinite(defect) else 0.0),
        converged=True,
        sections=sections,
        pair_distances=pairs,
    )


# -- dyadic calculus inequality ------------------------------------------------------

def calculus_weight_check(psi, c, i_max=60, nodes=64):
    """Verify the dyadic-shell weight inequality

    int_0^(1/4) psi(r) dr / (r (log r^2)^2)
        <= c log 2 + int_0^(1/4) (psi(r) - c) dr / r

    for psi >= c >= 0.  psi may be a callable or a table [(r, value)].
    The c-part of the left side integrates exactly to c / (8 log 2); the
    remainder is integrated shell by shell over [2^(-i-1), 2^(-i)].
    Returns (residual, parts); residual >= -tolerance certifies the bound.
    """
    if c < 0:
        raise DomainError("c must be nonnegative")
    fn = _as_function(psi)
    xs, ws = np.polynomial.legendre.leggauss(nodes)
    lhs_var = 0.0
    rhs_var = 0.0
    for i in range(2, i_max + 1):
        u_lo, u_hi = -(i + 1) * LOG2, -i * LOG2
        u = 0.5 * (u_hi - u_lo) * xs + 0.5 * (u_hi + u_lo)
        scale = 0.5 * (u_hi - u_lo)
        r = np.exp(u)
        vals = np.array([fn(x) for x in r], dtype=float)
        if np.any(vals < c - 1e-12 * max(1.0, c)):
            raise DomainError("psi(r) < c at a quadrature sample")
        excess = np.maximum(vals - c, 0.0)
        lhs_var += scale * float(np.sum(ws * excess / (2.0 * u) ** 2))
        rhs_var += scale * float(np.sum(ws * excess))
    lhs = c / (8.0 * LOG2) + lhs_var
    rhs = c * LOG2 + rhs_var
    return rhs - lhs, {"lhs": lhs, "rhs": rhs, "lhs_excess": lhs_var, "rhs_excess": rhs_var}


def _as_function(psi):
    if callable(psi):
        return psi
    table = sorted((float(r), float(v)) for r, v in psi)
    rs = np.array([r for r, _ in table])
    vs = np.array([v for _, v in table])

    def fn(r):
        return float(np.interp(r, rs, vs))

    return fn


# -- tree singular set ----------------------------------------------------------------

def singular_set_flags(section, radius=None):
    """Grid nodes mapping within `radius` of a tree vertex of degree >= 3."""
    if not isinstance(section.space, MetricTree):
        raise UnsupportedSpace("singular-set flags are defined for tree targets")
    tree = section.space
    g = section.grid
    if radius is None:
        radius = max(g.h_t, g.h_theta)
    branch = [v for v in tree.vertices if tree.degree(v) >= 3]
    flags = []
    e_arr, o_arr = section.values
    for i in range(g.n_t + 1):
        for j in range(g.n_theta):
            p = TreePoint(int(e_arr[i, j]), float(o_arr[i, j]))
            if any(tree.dist_to_vertex(p, v) <= radius for v in branch):
                flags.append((i, j))
    total = (g.n_t + 1) * g.n_theta
    return flags, len(flags) / total
