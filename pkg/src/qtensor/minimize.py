"""Energy minimization of the discrete functional, full and uniaxial modes.

Two descent drivers share the retraction/gradient machinery: a gradient
flow with adaptive pseudo-time step (robust default) and a Polak-Ribiere
nonlinear conjugate gradient with Armijo backtracking (faster on the large
3D runs).  Director degrees of freedom are updated by tangent projection,
stepping and renormalization, which keeps unit length to machine precision.

Gradient conventions: `discrete_gradient` is the exact derivative of the
discrete total energy with respect to the interior coefficient values (so
it carries the quadrature volume factor and matches finite differences of
`total_energy` directly).  Convergence is monitored on the volume-scaled
max norm `|g| / h^dim`, which is the pointwise residual of the associated
Euler-Lagrange system in density units.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import tensor
from .fields import DirectorField, Field
from .grid import Grid, axis_slices, laplacian

ENERGY_SLACK = 1e-12
ISO_SKIP_FRAC = 1e-6


class SolverDivergence(RuntimeError):
    """Raised when the line search cannot find any descent step."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class ContinuationError(RuntimeError):
    """A member run of a continuation failed; partial results attached."""

    def __init__(self, message, records):
        super().__init__(message)
        self.records = records


@dataclass
class MinimizeOptions:
    mode: str = "full"  # full | uniaxial
    method: str = "gradient-flow"  # gradient-flow | nonlinear-cg
    dt: float = 1e-4
    grad_tol: float = 1e-3
    max_iters: int = 200000
    record_cadence: int = 200

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.grad_tol <= 0.0:
            raise ValueError("grad_tol must be positive")
        if self.mode not in ("full", "uniaxial"):
            raise ValueError("mode must be 'full' or 'uniaxial'")
        if self.method not in ("gradient-flow", "nonlinear-cg"):
            raise ValueError("method must be 'gradient-flow' or 'nonlinear-cg'")


@dataclass
class RunRecord:
    mode: str
    L: float
    converged: bool
    iterations: int
    energy: float
    elastic: float
    bulk_over_L: float
    grad_max: float
    history: np.ndarray  # columns: iter, energy, elastic, bulk_over_L, grad_max
    field: Field
    s: np.ndarray | None = None
    director: DirectorField | None = None
    residuals: dict = dataclass_field(default_factory=dict)
    flags: dict = dataclass_field(default_factory=dict)


# -- full 5-dof / 2-dof mode ---------------------------------------------------


def _full_energy(grid, vals, p):
    h2 = grid.h * grid.h
    elastic = 0.0
    for ax in range(grid.dim):
        lo, hi = axis_slices(grid, ax)
        diff = vals[hi] - vals[lo]
        elastic += 0.5 * np.sum(grid.edge_weight[ax] * np.sum(diff * diff, axis=-1)) / h2
    fb = tensor.bulk_energy(vals, p)
    bulk = float(np.sum(grid.node_weight * fb)) / p.L
    return float(elastic) + bulk, float(elastic), bulk


def _full_energy_grad(grid, vals, p):
    h2 = grid.h * grid.h
    g = np.zeros_like(vals)
    elastic = 0.0
    for ax in range(grid.dim):
        lo, hi = axis_slices(grid, ax)
        diff = vals[hi] - vals[lo]
        t = (grid.edge_weight[ax] / h2)[..., None] * diff
        elastic += 0.5 * np.sum(t * diff)
        g[hi] += t
        g[lo] -= t
    fb = tensor.bulk_energy(vals, p)
    bulk = float(np.sum(grid.node_weight * fb)) / p.L
    g += tensor.bulk_gradient(vals, p) * (grid.node_weight / p.L)[..., None]
    g[~grid.interior] = 0.0
    return float(elastic) + bulk, float(elastic), bulk, g


def discrete_gradient(field: Field, p: tensor.MaterialParams):
    """Exact gradient of the discrete total energy w.r.t. interior values.

    Zero at boundary and exterior nodes.  Dividing by h^dim gives the
    density-scaled Euler-Lagrange residual of the full system.
    """
    _, _, _, g = _full_energy_grad(field.grid, field.values, p)
    return g


class _FullProblem:
    def __init__(self, grid, p):
        self.grid = grid
        self.p = p
        self.vol = grid.h**grid.dim

    def energy(self, x):
        return _full_energy(self.grid, x[0], self.p)[0]

    def energy_grad(self, x):
        e, el, bulk, g = _full_energy_grad(self.grid, x[0], self.p)
        return e, el, bulk, (g,)

    def retract(self, x, d, a):
        vals = x[0].copy()
        upd = a * d[0]
        vals[self.grid.interior] += upd[self.grid.interior]
        return (vals,)

    def grad_max(self, g):
        gn = np.sqrt(np.sum(g[0] * g[0], axis=-1))
        return float(gn.max()) / self.vol

    def dot(self, a, b):
        return float(np.sum(a[0] * b[0]))


# -- uniaxial-constrained mode -------------------------------------------------


def _uni_energy(grid, s, n, p):
    h2 = grid.h * grid.h
    cs = 1.0 / 3.0 if grid.dim == 3 else 0.25
    elastic = 0.0
    for ax in range(grid.dim):
        lo, hi = axis_slices(grid, ax)
        w = grid.edge_weight[ax] / h2
        ds = s[hi] - s[lo]
        dn = n[hi] - n[lo]
        dn2 = np.sum(dn * dn, axis=-1)
        s2bar = 0.5 * (s[hi] * s[hi] + s[lo] * s[lo])
        elastic += np.sum(w * (cs * ds * ds + s2bar * dn2))
    fb = tensor.uniaxial_bulk(s, p, grid.dim)
    bulk = float(np.sum(grid.node_weight * fb)) / p.L
    return float(elastic) + bulk, float(elastic), bulk


def _uni_energy_grad(grid, s, n, p):
    h2 = grid.h * grid.h
    cs = 1.0 / 3.0 if grid.dim == 3 else 0.25
    gs = np.zeros_like(s)
    gn = np.zeros_like(n)
    elastic = 0.0
    for ax in range(grid.dim):
        lo, hi = axis_slices(grid, ax)
        w = grid.edge_weight[ax] / h2
        ds = s[hi] - s[lo]
        dn = n[hi] - n[lo]
        dn2 = np.sum(dn * dn, axis=-1)
        s2bar = 0.5 * (s[hi] * s[hi] + s[lo] * s[lo])
        elastic += np.sum(w * (cs * ds * ds + s2bar * dn2))
        t = w * 2.0 * cs * ds
        gs[hi] += t
        gs[lo] -= t
        wd = w * dn2
        gs[hi] += wd * s[hi]
        gs[lo] += wd * s[lo]
        tn = (2.0 * w * s2bar)[..., None] * dn
        gn[hi] += tn
        gn[lo] -= tn
    fb = tensor.uniaxial_bulk(s, p, grid.dim)
    bulk = float(np.sum(grid.node_weight * fb)) / p.L
    gs += grid.node_weight * tensor.uniaxial_bulk_grad(s, p, grid.dim) / p.L
    # tangent projection; the director equation is skipped on the isotropic set
    gn -= np.sum(gn * n, axis=-1)[..., None] * n
    iso = s < ISO_SKIP_FRAC * p.s_plus_for(grid.dim)
    gn[iso] = 0.0
    gs[~grid.interior] = 0.0
    gn[~grid.interior] = 0.0
    return float(elastic) + bulk, float(elastic), bulk, (gs, gn)


class _UniaxialProblem:
    def __init__(self, grid, p):
        self.grid = grid
        self.p = p
        self.vol = grid.h**grid.dim
        self.clamped = False

    def energy(self, x):
        return _uni_energy(self.grid, x[0], x[1], self.p)[0]

    def energy_grad(self, x):
        e, el, bulk, (gs, gn) = _uni_energy_grad(self.grid, x[0], x[1], self.p)
        return e, el, bulk, (gs, gn)

    def retract(self, x, d, a):
        s, n = x[0].copy(), x[1].copy()
        sel = self.grid.interior
        s_new = s + a * d[0]
        if np.any(s_new[sel] < 0.0):
            self.clamped = True
            s_new = np.maximum(s_new, 0.0)
        s[sel] = s_new[sel]
        n_new = n + a * d[1]
        norm = np.linalg.norm(n_new, axis=-1)
        ok = norm > 1e-12
        n_new = np.where(ok[..., None], n_new / np.maximum(norm, 1e-300)[..., None], n)
        n[sel] = n_new[sel]
        return (s, n)

    def grad_max(self, g):
        gs_max = float(np.abs(g[0]).max())
        gn_max = float(np.sqrt(np.sum(g[1] * g[1], axis=-1)).max())
        return max(gs_max, gn_max) / self.vol

    def dot(self, a, b):
        return float(np.sum(a[0] * b[0]) + np.sum(a[1] * b[1]))


# -- descent drivers -----------------------------------------------------------


def _neg(d):
    return tuple(-a for a in d)


def _combine(a, scale, b):
    return tuple(x + scale * y for x, y in zip(a, b))


def _run_descent(problem, x, opts: MinimizeOptions):
    history = []
    e, el, bulk, g = problem.energy_grad(x)
    if not np.isfinite(e):
        raise SolverDivergence("non-finite energy at the initial iterate")
    gmax = problem.grad_max(g)
    history.append((0, e, el, bulk, gmax))
    if opts.method == "gradient-flow":
        x, e, el, bulk, g, gmax, iters = _flow_loop(problem, x, e, el, bulk, g, gmax, opts, history)
    else:
        x, e, el, bulk, g, gmax, iters = _ncg_loop(problem, x, e, el, bulk, g, gmax, opts, history)
    if not history or history[-1][0] != iters:
        history.append((iters, e, el, bulk, gmax))
    return x, e, el, bulk, gmax, iters, np.array(history)


def _flow_loop(problem, x, e, el, bulk, g, gmax, opts, history):
    dt = opts.dt
    it = 0
    rejects = 0
    while it < opts.max_iters and gmax >= opts.grad_tol:
        trial = problem.retract(x, g, -dt)
        e_t, el_t, bulk_t, g_t = problem.energy_grad(trial)
        if e_t <= e + ENERGY_SLACK * max(1.0, abs(e)):
            x, e, el, bulk, g = trial, e_t, el_t, bulk_t, g_t
            gmax = problem.grad_max(g)
            it += 1
            dt = min(dt * 1.1, opts.dt * 1e6)
            if it % opts.record_cadence == 0:
                history.append((it, e, el, bulk, gmax))
        else:
            dt *= 0.5
            rejects += 1
            if dt < 1e-300 or rejects > 2000:
                raise SolverDivergence("gradient flow stalled: no descent step found")
    return x, e, el, bulk, g, gmax, it


def _ncg_loop(problem, x, e, el, bulk, g, gmax, opts, history):
    d = _neg(g)
    gg = problem.dot(g, g)
    alpha = opts.dt
    it = 0
    while it < opts.max_iters and gmax >= opts.grad_tol:
        slope = problem.dot(g, d)
        if slope >= 0.0:
            d = _neg(g)
            slope = -gg
        a = alpha
        accepted = False
        for _ in range(60):
            trial = problem.retract(x, d, a)
            e_t = problem.energy(trial)
            if e_t <= e + 1e-4 * a * slope + ENERGY_SLACK * max(1.0, abs(e)):
                accepted = True
                break
            a *= 0.5
        if not accepted:
            if problem.dot(d, g) != -gg:
                # retry from steepest descent before giving up
                d = _neg(g)
                alpha = max(alpha * 0.25, 1e-280)
                continue
            raise SolverDivergence("line search failed along steepest descent")
        x = trial
        e, el, bulk, g_new = problem.energy_grad(x)
        gg_new = problem.dot(g_new, g_new)
        beta = max(0.0, (gg_new - problem.dot(g_new, g)) / max(gg, 1e-300))
        d = _combine(_neg(g_new), beta, d)
        g, gg = g_new, gg_new
        gmax = problem.grad_max(g)
        it += 1
        alpha = a * 2.0
        if it % opts.record_cadence == 0:
            history.append((it, e, el, bulk, gmax))
    return x, e, el, bulk, g, gmax, it


# -- public minimizers ---------------------------------------------------------


def minimize_full(f0: Field, p: tensor.MaterialParams, opts: MinimizeOptions | None = None):
    """Minimize the discrete energy over the interior coefficients of f0."""
    opts = opts or MinimizeOptions(mode="full")
    grid = f0.grid
    problem = _FullProblem(grid, p)
    x, e, el, bulk, gmax, iters, history = _run_descent(problem, (f0.values.copy(),), opts)
    out = Field(grid, x[0], boundary_values=f0.boundary_values.copy())
    rec = RunRecord(
        mode="full",
        L=p.L,
        converged=gmax < opts.grad_tol,
        iterations=iters,
        energy=e,
        elastic=el,
        bulk_over_L=bulk,
        grad_max=gmax,
        history=history,
        field=out,
    )
    rec.residuals = {"grad_max": gmax, "pde_max": p.L * gmax}
    return rec


def minimize_uniaxial(
    s0,
    n0: DirectorField,
    p: tensor.MaterialParams,
    opts: MinimizeOptions | None = None,
):
    """Minimize the energy restricted to the uniaxial slice Q = s (n n' - I/dim).

    s0 must be nonnegative with s = s_plus on the boundary; n0 unit with
    n = n_b on the boundary.  Negative s excursions are clamped to zero and
    flagged.  NaN anywhere aborts.
    """
    opts = opts or MinimizeOptions(mode="uniaxial")
    grid = n0.grid
    s0 = np.asarray(s0, dtype=float)
    if np.any(s0[grid.inside] < 0.0):
        raise ValueError("initial amplitude must be nonnegative")
    problem = _UniaxialProblem(grid, p)
    x, e, el, bulk, gmax, iters, history = _run_descent(
        problem, (s0.copy(), n0.values.copy()), opts
    )
    s, n = x
    if np.any(np.isnan(s)) or np.any(np.isnan(n)):
        raise SolverDivergence("NaN in uniaxial iterate")
    vals = np.zeros(grid.shape + (5 if grid.dim == 3 else 2,))
    if grid.dim == 3:
        vals[grid.inside] = tensor.make_uniaxial(s[grid.inside], n[grid.inside])
    else:
        vals[grid.inside] = tensor.planar_coeffs(s[grid.inside], n[grid.inside])
    out = Field(grid, vals)
    rec = RunRecord(
        mode="uniaxial",
        L=p.L,
        converged=gmax < opts.grad_tol,
        iterations=iters,
        energy=e,
        elastic=el,
        bulk_over_L=bulk,
        grad_max=gmax,
        history=history,
        field=out,
        s=s,
        director=DirectorField(grid, np.where(grid.inside[..., None], n, 0.0), check=False),
    )
    rec.flags["clamped_negative_s"] = problem.clamped
    rec.residuals = {"grad_max": gmax}
    return rec


# -- initialization and continuation --------------------------------------------


RAMP_RADIUS_FRACTION = 0.2


def initial_director(grid: Grid, bd):
    """Interior director extension respecting the boundary topology."""
    pos = grid.positions
    if bd.kind == "radial":
        r = grid.radii()
        at_core = r == 0.0
        n = pos / np.maximum(r, 1e-300)[..., None]
        n[at_core] = np.array([0.0, 0.0, 1.0])  # arbitrary; amplitude is 0 there
    elif bd.kind == "planar-degree":
        d = bd.params["degree"]
        x, y = pos[..., 0], pos[..., 1]
        if d == 0:
            n = np.zeros(grid.shape + (2,))
            n[..., 0] = 1.0
        else:
            at_core = (x == 0.0) & (y == 0.0)
            from .fields import _complex_unit_power

            wr, wi = _complex_unit_power(np.where(at_core, 1.0, x), np.where(at_core, 0.0, y), d)
            n = np.stack([wr, wi], axis=-1)
    else:
        # nearest boundary direction; adequate warm start for tabulated data
        from scipy.spatial import cKDTree

        bpos = grid.positions[grid.boundary_indices]
        tree = cKDTree(bpos)
        _, idx = tree.query(pos.reshape(-1, grid.dim))
        n = bd.values[idx].reshape(grid.shape + (grid.dim,))
    n[grid.boundary_indices] = bd.values
    n[~grid.inside] = 0.0
    return n


def initial_state(grid: Grid, bd, p: tensor.MaterialParams, scale=None):
    """Ramped-amplitude warm start (s, n) honoring the boundary data."""
    sp = p.s_plus_for(grid.dim)
    scale = scale if scale is not None else grid.shape_params.get(
        "radius", grid.shape_params.get("side", 1.0)
    )
    r0 = RAMP_RADIUS_FRACTION * scale
    n = initial_director(grid, bd)
    if bd.kind == "planar-degree" and bd.params.get("degree", 0) == 0:
        s = np.full(grid.shape, sp)
    elif bd.kind == "radial" or bd.kind == "planar-degree":
        s = sp * np.minimum(grid.radii() / r0, 1.0)
    else:
        s = np.full(grid.shape, sp)
    s[grid.boundary_indices] = sp
    s[~grid.inside] = 0.0
    return s, n


def initial_field(grid: Grid, bd, p: tensor.MaterialParams):
    """Full-mode warm start: the uniaxial interpolant with a mollified core."""
    s, n = initial_state(grid, bd, p)
    vals = np.zeros(grid.shape + (5 if grid.dim == 3 else 2,))
    if grid.dim == 3:
        vals[grid.inside] = tensor.make_uniaxial(s[grid.inside], n[grid.inside])
    else:
        vals[grid.inside] = tensor.planar_coeffs(s[grid.inside], n[grid.inside])
    return Field(grid, vals)


def continuation(grid: Grid, bd, p: tensor.MaterialParams, L_schedule, opts: MinimizeOptions):
    """Minimize at each L of a decreasing schedule, warm-starting each run."""
    L_schedule = list(L_schedule)
    if any(l <= 0.0 for l in L_schedule):
        raise ValueError("L schedule must be positive")
    if any(b >= a for a, b in zip(L_schedule, L_schedule[1:])):
        raise ValueError("L schedule must be strictly decreasing")
    records = []
    state = None
    for L in L_schedule:
        pL = p.with_L(L)
        try:
            if opts.mode == "full":
                f0 = initial_field(grid, bd, pL) if state is None else state
                rec = minimize_full(f0, pL, opts)
                state = rec.field.copy()
            else:
                if state is None:
                    s0, n0 = initial_state(grid, bd, pL)
                    n0 = DirectorField(
                        grid, np.where(grid.inside[..., None], n0, 0.0), check=False
                    )
                else:
                    s0, n0 = state
                rec = minimize_uniaxial(s0, n0, pL, opts)
                state = (rec.s.copy(), rec.director.copy())
        except SolverDivergence as exc:
            raise ContinuationError(f"run at L={L} failed: {exc}", records) from exc
        records.append(rec)
    return records


# -- independent residual diagnostics -------------------------------------------


def full_residual_stats(grid: Grid, vals, p: tensor.MaterialParams, mask=None):
    """Central-stencil residual of the full Euler-Lagrange system (density units)."""
    res = p.L * laplacian(grid, vals) - tensor.bulk_gradient(vals, p)
    rn = np.sqrt(np.sum(res * res, axis=-1))
    sel = grid.interior if mask is None else (grid.interior & mask)
    return {"max": float(rn[sel].max()), "mean": float(rn[sel].mean())}


def _central_diff(grid, arr, ax):
    up = np.roll(arr, -1, axis=ax)
    dn = np.roll(arr, 1, axis=ax)
    return (up - dn) / (2.0 * grid.h)


def uniaxial_residual_stats(grid: Grid, s, n, p: tensor.MaterialParams, mask, s_floor=0.25):
    """Residuals of the coupled (s, n) system on a converged uniaxial state.

    Two families are reported over `mask` (interior nodes away from defect
    cores and the staircase shell):

    * ``*_solver`` entries rescale the exact energy gradient into the
      amplitude and director equation forms; they are bounded by a small
      multiple of the stopping tolerance by construction.
    * the remaining entries re-evaluate the amplitude equation, the
      tangential director equation, its conservation form and the
      spherical-angle form with independent central stencils; they measure
      the consistency of two discretizations and carry an O(h^2)
      high-derivative floor on top of the solver tolerance.

    The director-equation scaling divides by s^2, so solver-form director
    residuals are restricted to nodes with s >= s_floor * s_plus.
    """
    vol = grid.h**grid.dim
    sp = p.s_plus_for(grid.dim)
    _, _, _, (gs, gn) = _uni_energy_grad(grid, s, n, p)
    away = mask & (s >= s_floor * sp)
    r_s_solver = 1.5 * np.abs(gs) / vol
    s2_safe = np.maximum(s * s, (s_floor * sp) ** 2)
    r_n_solver = np.sqrt(np.sum(gn * gn, axis=-1)) / (2.0 * s2_safe * vol)

    gnsq = np.zeros(grid.shape)
    for ax in range(grid.dim):
        d = _central_diff(grid, n, ax)
        gnsq += np.sum(d * d, axis=-1)
    lap_s = laplacian(grid, s)
    f = 2.0 * p.c2 * s * s - p.b2 * s - 3.0 * p.a2
    r_s = lap_s - 3.0 * s * gnsq - s * f / (3.0 * p.L)

    lap_n = laplacian(grid, n)
    conv = np.zeros_like(n)
    for ax in range(grid.dim):
        conv += _central_diff(grid, s, ax)[..., None] * _central_diff(grid, n, ax)
    safe_s = np.maximum(np.abs(s), 1e-300)
    vec = lap_n + 2.0 * conv / safe_s[..., None]
    vec_t = vec - np.sum(vec * n, axis=-1)[..., None] * n
    r_n = np.sqrt(np.sum(vec_t * vec_t, axis=-1))

    # conservation form: div(s^2 grad n_j) + s^2 |grad n|^2 n_j
    cons = np.zeros_like(n)
    s2 = s * s
    for ax in range(grid.dim):
        cons += _central_diff(grid, s2[..., None] * _central_diff(grid, n, ax), ax)
    cons += (s2 * gnsq)[..., None] * n
    r_cons = np.sqrt(np.sum(cons * cons, axis=-1))
    wide = grid.standoff_mask(2) & mask

    out = {
        "uneq_solver_max": float(r_s_solver[mask].max()),
        "uneq1_solver_max": float(r_n_solver[away].max()) if np.any(away) else np.nan,
        "uneq_max": float(np.abs(r_s[mask]).max()),
        "uneq_mean": float(np.abs(r_s[mask]).mean()),
        "uneq1_max": float(r_n[mask].max()),
        "uneq1_mean": float(r_n[mask].mean()),
        "new11_max": float(r_cons[wide].max()) if np.any(wide) else np.nan,
    }
    if grid.dim == 3:
        out.update(_angle_residuals(grid, s, n, p, mask))
    return out


def _wrapped_phi_diff(grid, n, ax, half):
    """Azimuth increments free of branch-cut jumps, via complex ratios."""
    w = n[..., 0] + 1j * n[..., 1]
    mag = np.abs(w)
    w = np.where(mag > 1e-30, w / np.maximum(mag, 1e-300), 1.0 + 0.0j)
    if half:
        lo, hi = axis_slices(grid, ax)
        ratio = w[hi] * np.conj(w[lo])
        return np.angle(ratio) / grid.h
    up = np.roll(w, -1, axis=ax)
    dn = np.roll(w, 1, axis=ax)
    return np.angle(up * np.conj(dn)) / (2.0 * grid.h)


def _angle_residuals(grid: Grid, s, n, p, mask):
    """Residuals of the spherical-angle form of the director equations.

    theta is the polar angle of n, phi its azimuth; the chart degenerates
    near the poles, so nodes with |n3| > 0.9 are excluded.
    """
    theta = np.arccos(np.clip(n[..., 2], -1.0, 1.0))
    ok = mask & (np.abs(n[..., 2]) <= 0.9)
    s2 = s * s
    h = grid.h

    div_theta = np.zeros(grid.shape)
    div_phi = np.zeros(grid.shape)
    gphisq = np.zeros(grid.shape)
    sin2 = np.sin(theta) ** 2
    for ax in range(grid.dim):
        lo, hi = axis_slices(grid, ax)
        s2bar = 0.5 * (s2[hi] + s2[lo])
        flux_t = s2bar * (theta[hi] - theta[lo]) / h
        dphi = _wrapped_phi_diff(grid, n, ax, half=True)
        flux_p = s2bar * 0.5 * (sin2[hi] + sin2[lo]) * dphi
        for acc, flux in ((div_theta, flux_t), (div_phi, flux_p)):
            pad_lo = [slice(None)] * grid.dim
            pad_hi = [slice(None)] * grid.dim
            pad_lo[ax] = slice(0, -1)
            pad_hi[ax] = slice(1, None)
            # div at a node: (upper-edge flux - lower-edge flux) / h
            acc[tuple(pad_lo)] += flux / h
            acc[tuple(pad_hi)] -= flux / h
        dphi_c = _wrapped_phi_diff(grid, n, ax, half=False)
        gphisq += dphi_c * dphi_c
    rhs = s2 * np.sin(theta) * np.cos(theta) * gphisq
    r_theta = div_theta - rhs
    r_phi = div_phi
    if not np.any(ok):
        return {"angle_theta_max": np.nan, "angle_phi_max": np.nan}
    return {
        "angle_theta_max": float(np.abs(r_theta[ok]).max()),
        "angle_phi_max": float(np.abs(r_phi[ok]).max()),
    }
