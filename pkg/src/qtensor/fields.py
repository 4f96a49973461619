"""Tensor and director fields on masked grids, energies and field analysis."""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import tensor
from .grid import Grid, axis_slices

_SQRT2 = np.sqrt(2.0)


def _component_mask(grid, arr):
    sel = grid.interior
    extra = arr.ndim - grid.dim
    if extra > 0:
        sel = np.broadcast_to(sel[(...,) + (None,) * extra], arr.shape)
    return sel


class Field:
    """Grid array of tensor coefficients with frozen Dirichlet boundary data.

    `values` has shape grid.shape + (dofs,) with dofs = 5 in 3D mode and
    2 in 2D mode.  Boundary nodes always hold `boundary_values`; exterior
    nodes hold zeros and are never read.
    """

    def __init__(self, grid: Grid, values, boundary_values=None):
        self.grid = grid
        self.values = np.ascontiguousarray(values, dtype=float)
        expected_dofs = 5 if grid.dim == 3 else 2
        if self.values.shape != grid.shape + (expected_dofs,):
            raise ValueError("field values must have shape grid.shape + (dofs,)")
        if boundary_values is None:
            boundary_values = self.values[grid.boundary_indices].copy()
        self.boundary_values = np.ascontiguousarray(boundary_values, dtype=float)
        self.apply_boundary()
        self.values[~grid.inside] = 0.0

    @property
    def dofs(self):
        return self.values.shape[-1]

    def apply_boundary(self):
        self.values[self.grid.boundary_indices] = self.boundary_values

    def copy(self):
        f = Field.__new__(Field)
        f.grid = self.grid
        f.values = self.values.copy()
        f.boundary_values = self.boundary_values.copy()
        return f

    @classmethod
    def constant(cls, grid, coeffs):
        vals = np.tile(np.asarray(coeffs, dtype=float), grid.shape + (1,))
        return cls(grid, vals)


class DirectorField:
    """Grid array of unit vectors (S1 in 2D, S2 in 3D)."""

    def __init__(self, grid: Grid, values, check=True):
        self.grid = grid
        self.values = np.ascontiguousarray(values, dtype=float)
        if self.values.shape != grid.shape + (grid.dim,):
            raise ValueError("director values must have shape grid.shape + (dim,)")
        if check:
            norms = np.linalg.norm(self.values[grid.inside], axis=-1)
            if np.any(np.abs(norms - 1.0) > tensor.UNIT_NORM_TOL):
                raise ValueError("director field must be unit length on inside nodes")

    def copy(self):
        return DirectorField(self.grid, self.values.copy(), check=False)


@dataclass
class BoundaryDirector:
    """Unit vectors on the boundary nodes plus the topological degree."""

    grid: Grid
    values: np.ndarray  # (n_boundary, dim), aligned with grid.boundary_indices
    degree: float | None
    kind: str
    params: dict = dataclass_field(default_factory=dict)

    def scatter(self, fill=None):
        """Full-grid array holding the boundary vectors (fill elsewhere)."""
        out = np.zeros(self.grid.shape + (self.grid.dim,))
        if fill is not None:
            out[...] = np.asarray(fill, dtype=float)
        out[self.grid.boundary_indices] = self.values
        return out


def _complex_unit_power(x, y, d):
    """(z/|z|)^d via repeated complex multiplication; exact under grid symmetries."""
    r = np.sqrt(x * x + y * y)
    cr, ci = x / r, y / r
    wr = np.ones_like(cr)
    wi = np.zeros_like(ci)
    for _ in range(abs(int(d))):
        wr, wi = wr * cr - wi * ci, wr * ci + wi * cr
    if d < 0:
        wi = -wi
    return wr, wi


def boundary_director(grid: Grid, kind, degree=None, table=None):
    """Strong-anchoring boundary data.

    kind 'planar-degree' (2D): n(theta) = (cos d theta, sin d theta);
    kind 'radial' (3D): n = x/|x|; kind 'tabulated': caller-supplied unit
    vectors aligned with grid.boundary_indices.
    """
    bi = grid.boundary_indices
    if kind == "planar-degree":
        if grid.dim != 2:
            raise ValueError("planar-degree boundary data is 2D only")
        d = int(degree)
        x = grid.axis_coords(0)[bi[0]]
        y = grid.axis_coords(1)[bi[1]]
        if d == 0:
            vals = np.stack([np.ones_like(x), np.zeros_like(y)], axis=-1)
        else:
            wr, wi = _complex_unit_power(x, y, d)
            vals = np.stack([wr, wi], axis=-1)
        bd = BoundaryDirector(grid, vals, None, kind, {"degree": d})
        bd.degree = director_loop_winding(grid, bd)
        return bd
    if kind == "radial":
        if grid.dim != 3:
            raise ValueError("radial boundary data is 3D only")
        pos = grid.positions[bi]
        r = np.linalg.norm(pos, axis=-1)
        if np.any(r == 0.0):
            raise ValueError("radial data undefined at the origin")
        return BoundaryDirector(grid, pos / r[:, None], 1, kind, {})
    if kind == "tabulated":
        vals = np.ascontiguousarray(table, dtype=float)
        if vals.shape != (len(bi[0]), grid.dim):
            raise ValueError("tabulated data must align with the boundary nodes")
        norms = np.linalg.norm(vals, axis=-1)
        if np.any(np.abs(norms - 1.0) > tensor.UNIT_NORM_TOL):
            raise ValueError("tabulated boundary vectors must be unit length")
        bd = BoundaryDirector(grid, vals, degree, kind, {})
        if grid.dim == 2:
            bd.degree = director_loop_winding(grid, bd)
        return bd
    raise ValueError(f"unknown boundary kind {kind!r}")


def director_loop_winding(grid: Grid, bd: BoundaryDirector):
    """Winding of 2D boundary data along the ordered boundary loop."""
    loop = grid.boundary_loop()
    full = bd.scatter()
    vecs = full[loop[:, 0], loop[:, 1]]
    ang = np.arctan2(vecs[:, 1], vecs[:, 0])
    d = np.diff(np.concatenate([ang, ang[:1]]))
    d = (d + np.pi) % (2.0 * np.pi) - np.pi
    total = d.sum() / (2.0 * np.pi)
    return int(np.rint(total))


def boundary_field(grid: Grid, bd: BoundaryDirector, p: tensor.MaterialParams):
    """Dirichlet tensor data on the bulk vacuum built from a boundary director."""
    if grid.dim == 3:
        coeffs = tensor.make_uniaxial(p.s_plus, bd.values)
    else:
        coeffs = tensor.planar_coeffs(p.s_plus_2d, bd.values)
    return coeffs


# -- energies ----------------------------------------------------------------


@dataclass
class EnergyBreakdown:
    elastic: float
    bulk_over_L: float
    total: float
    per_node_density: np.ndarray


def elastic_energy(grid: Grid, vals):
    """(1/2) integral |grad Q|^2 by the edge quadrature (exact sum of squares)."""
    h2 = grid.h * grid.h
    total = 0.0
    for ax in range(grid.dim):
        lo, hi = axis_slices(grid, ax)
        diff = vals[hi] - vals[lo]
        w = grid.edge_weight[ax]
        total += 0.5 * np.sum(w * np.sum(diff * diff, axis=-1)) / h2
    return total


def gradsq_nodes(grid: Grid, vals):
    """Nodewise |grad .|^2 by central differences, one-sided at the shell.

    `vals` may carry trailing component axes; the square sums over them.
    Exterior nodes report zero.
    """
    a = np.asarray(vals, dtype=float)
    extra = a.ndim - grid.dim
    inside = grid.inside
    out = np.zeros(grid.shape)
    h = grid.h
    for ax in range(grid.dim):
        fwd_ok = np.zeros(grid.shape, dtype=bool)
        bwd_ok = np.zeros(grid.shape, dtype=bool)
        lo, hi = axis_slices(grid, ax)
        fwd_ok[lo] = inside[lo] & inside[hi]
        bwd_ok[hi] = inside[hi] & inside[lo]
        up = np.roll(a, -1, axis=ax)
        dn = np.roll(a, 1, axis=ax)
        central = fwd_ok & bwd_ok
        d = np.zeros(a.shape)
        sel = central[(...,) + (None,) * extra] if extra else central
        np.copyto(d, (up - dn) / (2.0 * h), where=np.broadcast_to(sel, a.shape))
        only_f = fwd_ok & ~bwd_ok
        sel = only_f[(...,) + (None,) * extra] if extra else only_f
        np.copyto(d, (up - a) / h, where=np.broadcast_to(sel, a.shape))
        only_b = bwd_ok & ~fwd_ok
        sel = only_b[(...,) + (None,) * extra] if extra else only_b
        np.copyto(d, (a - dn) / h, where=np.broadcast_to(sel, a.shape))
        if extra:
            out += np.sum(d * d, axis=tuple(range(grid.dim, a.ndim)))
        else:
            out += d * d
    out[~inside] = 0.0
    return out


def energy_density(field: Field, p: tensor.MaterialParams):
    """Nodewise e_L = (1/2)|grad Q|^2 + f_B(Q)/L on inside nodes."""
    grid = field.grid
    dens = 0.5 * gradsq_nodes(grid, field.values)
    fb = tensor.bulk_energy(field.values, p)
    dens = dens + np.where(grid.inside, fb, 0.0) / p.L
    return dens


def total_energy(field: Field, p: tensor.MaterialParams):
    """Energy breakdown of the discrete functional."""
    grid = field.grid
    el = elastic_energy(grid, field.values)
    fb = tensor.bulk_energy(field.values, p)
    bulk = float(np.sum(grid.node_weight * np.where(grid.inside, fb, 0.0))) / p.L
    return EnergyBreakdown(
        elastic=float(el),
        bulk_over_L=bulk,
        total=float(el) + bulk,
        per_node_density=energy_density(field, p),
    )


def normalized_ball_energy(field: Field, p: tensor.MaterialParams, center, r):
    """(1/r) * quadrature of e_L over the nodes within distance r of center.

    The ball must lie in the interior; a ball touching boundary or exterior
    nodes is rejected (the monotonicity diagnostic is interior only).
    """
    grid = field.grid
    dist = grid.radii(center)
    sel = dist <= r
    if not np.all(grid.interior[sel]):
        raise ValueError("ball reaches non-interior nodes; shrink r or move the center")
    dens = energy_density(field, p)
    vol = grid.h**grid.dim
    return float(np.sum(dens[sel]) * vol / r)


# -- uniaxial extraction ------------------------------------------------------


@dataclass
class UniaxialFields:
    s: np.ndarray
    director: DirectorField
    biax_mask: np.ndarray
    iso_mask: np.ndarray


def _align_directors(grid: Grid, n, good):
    """Greedy sign propagation over inside nodes; `good` nodes seed/carry.

    The director is head-tail symmetric, so each connected sweep flips
    vectors to agree with an already-aligned axis neighbor.  Flagged nodes
    (isotropic or biaxial cores) do not propagate sign information.
    """
    aligned = np.zeros(grid.shape, dtype=bool)
    carrier = grid.inside & good
    if not np.any(carrier):
        return n
    seed = np.unravel_index(np.argmax(carrier), grid.shape)
    aligned[seed] = True
    pending = True
    while pending:
        pending = False
        for ax in range(grid.dim):
            for shift in (1, -1):
                src = np.roll(aligned, shift, axis=ax)
                edge = [slice(None)] * grid.dim
                edge[ax] = 0 if shift == 1 else -1
                src[tuple(edge)] = False
                new = src & carrier & ~aligned
                if not np.any(new):
                    continue
                ref = np.roll(n, shift, axis=ax)
                dots = np.sum(ref * n, axis=-1)
                flip = new & (dots < 0.0)
                n[flip] *= -1.0
                aligned |= new
                pending = True
    return n


def uniaxial_fields(field: Field, tol=1e-8, iso_frac=1e-6, p=None):
    """Per-node amplitude s, director n and biaxiality flags.

    In 3D the amplitude is the leading two-thirds eigenvalue scale S and the
    director the leading eigenvector; nodes with R > tol |Q| are flagged
    biaxial.  Isotropic nodes get s = 0 and an arbitrary flagged director.
    Director signs are aligned by greedy propagation between unflagged
    neighbors.
    """
    grid = field.grid
    vals = field.values
    if grid.dim == 3:
        d = tensor.decompose(vals, tol=tol)
        s = np.where(grid.inside, d.s_l, 0.0)
        n = d.eigenvectors[..., 0, :].copy()
        norm = np.sqrt(tensor.trace2(vals))
        scale = norm[grid.inside].max() if np.any(grid.inside) else 1.0
        iso = grid.inside & (norm <= iso_frac * max(scale, 1e-300))
        biax = grid.inside & ~d.uniaxial & ~iso
        n[iso] = np.array([0.0, 0.0, 1.0])
    else:
        c = vals
        amp = np.sqrt(np.sum(c * c, axis=-1))
        s = np.where(grid.inside, _SQRT2 * amp, 0.0)
        half = 0.5 * np.arctan2(c[..., 1], c[..., 0])
        n = np.stack([np.cos(half), np.sin(half)], axis=-1)
        scale = s[grid.inside].max() if np.any(grid.inside) else 1.0
        iso = grid.inside & (s <= iso_frac * max(scale, 1e-300))
        biax = np.zeros(grid.shape, dtype=bool)
        n[iso] = np.array([1.0, 0.0])
    n[~grid.inside] = 0.0
    n = _align_directors(grid, n, ~(iso | biax))
    n[~grid.inside] = 0.0
    nf = DirectorField(grid, np.where(grid.inside[..., None], n, 0.0), check=False)
    return UniaxialFields(s=s, director=nf, biax_mask=biax, iso_mask=iso)


def director_gradsq(grid: Grid, director: DirectorField):
    """Central-difference |grad n|^2 of an oriented director field."""
    return gradsq_nodes(grid, director.values)


def line_field_gradsq(grid: Grid, s, field: Field):
    """|grad n|^2 from the tensor identity, free of director sign ambiguity.

    Uses |grad Q|^2 = (2/3)|grad s|^2 + 2 s^2 |grad n|^2 in 3D and the
    (1/2, 2 s^2) analogue in 2D; only meaningful away from isotropic nodes.
    """
    grid_q = gradsq_nodes(grid, field.values)
    grad_s = gradsq_nodes(grid, s)
    coeff = 2.0 / 3.0 if grid.dim == 3 else 0.5
    s2 = np.maximum(s * s, 1e-300)
    return np.maximum(grid_q - coeff * grad_s, 0.0) / (2.0 * s2)
