"""Masked structured grids with the quadrature weights used by the energies.

Mask codes: 0 exterior, 1 interior, 2 boundary.  Boundary nodes are the
inside nodes adjacent (along an axis) to an exterior node or to a face of
the bounding box, so every interior node has a full axis stencil of inside
neighbors.  Curved shapes (disk, ball) are realized as staircase masks
with Dirichlet data imposed on the staircase shell.

Quadrature is cell based: a cell counts when all 2^dim corners are inside.
Node and edge weights are the trapezoid-rule weights induced by averaging
over complete cells, which makes the discrete elastic energy an exact
weighted sum of squared forward differences (and hence exactly
differentiable).
"""

from __future__ import annotations

import itertools

import numpy as np

EXTERIOR, INTERIOR, BOUNDARY = 0, 1, 2

MIN_RESOLUTION = 16


def _corner_sum(cells, out_shape):
    """Sum of the 2^dim complete-cell indicators incident to each node."""
    dim = cells.ndim
    padded = np.pad(cells.astype(np.int64), 1)
    total = np.zeros(out_shape, dtype=np.int64)
    for offs in itertools.product((0, 1), repeat=dim):
        sl = tuple(slice(o, o + s) for o, s in zip(offs, out_shape))
        total += padded[sl]
    return total


def _edge_cell_count(cells, axis, edge_shape):
    """Number of complete cells incident to each axis edge."""
    dim = cells.ndim
    pad = [(0, 0)] * dim
    for ax in range(dim):
        if ax != axis:
            pad[ax] = (1, 1)
    padded = np.pad(cells.astype(np.int64), pad)
    total = np.zeros(edge_shape, dtype=np.int64)
    transverse = [ax for ax in range(dim) if ax != axis]
    for offs in itertools.product((0, 1), repeat=dim - 1):
        sl = [slice(None)] * dim
        for ax, o in zip(transverse, offs):
            sl[ax] = slice(o, o + edge_shape[ax])
        total += padded[tuple(sl)]
    return total


class Grid:
    """Uniform grid over a masked domain, centered at the origin."""

    def __init__(self, dim, shape, h, mask, origin, shape_tag="custom", shape_params=None):
        self.dim = int(dim)
        self.shape = tuple(int(s) for s in shape)
        self.h = float(h)
        self.mask = np.ascontiguousarray(mask, dtype=np.uint8)
        self.origin = tuple(float(o) for o in origin)
        self.shape_tag = shape_tag
        self.shape_params = dict(shape_params or {})
        if self.mask.shape != self.shape:
            raise ValueError("mask shape does not match grid extents")
        if self.h <= 0.0:
            raise ValueError("grid spacing must be positive")
        self._build()

    def _build(self):
        self.inside = self.mask > EXTERIOR
        self.interior = self.mask == INTERIOR
        self.boundary = self.mask == BOUNDARY
        # every interior node must have a full axis stencil of inside neighbors
        for ax in range(self.dim):
            for shift in (1, -1):
                nb = np.roll(self.inside, shift, axis=ax)
                edge = [slice(None)] * self.dim
                edge[ax] = 0 if shift == 1 else -1
                nb[tuple(edge)] = False
                if np.any(self.interior & ~nb):
                    raise ValueError("interior node with incomplete stencil")

        corners = self.inside
        cells = corners[tuple(slice(0, -1) for _ in range(self.dim))].copy()
        for offs in itertools.product((0, 1), repeat=self.dim):
            if all(o == 0 for o in offs):
                continue
            sl = tuple(slice(o, o + s - 1) for o, s in zip(offs, self.shape))
            cells &= corners[sl]
        self.cell_inside = cells

        vol = self.h**self.dim
        counts = _corner_sum(cells, self.shape)
        self.node_weight = vol * counts / float(2**self.dim)

        self.edge_weight = []
        for ax in range(self.dim):
            eshape = tuple(s - 1 if a == ax else s for a, s in enumerate(self.shape))
            cnt = _edge_cell_count(cells, ax, eshape)
            self.edge_weight.append(vol * cnt / float(2 ** (self.dim - 1)))

        self._positions = None
        self._boundary_loop = None

    # -- geometry -----------------------------------------------------------

    def axis_coords(self, ax):
        return self.origin[ax] + self.h * np.arange(self.shape[ax])

    @property
    def positions(self):
        if self._positions is None:
            axes = [self.axis_coords(ax) for ax in range(self.dim)]
            mesh = np.meshgrid(*axes, indexing="ij")
            self._positions = np.stack(mesh, axis=-1)
        return self._positions

    def radii(self, center=None):
        pos = self.positions
        if center is None:
            center = np.zeros(self.dim)
        d = pos - np.asarray(center, dtype=float)
        return np.sqrt(np.sum(d * d, axis=-1))

    @property
    def boundary_indices(self):
        return np.nonzero(self.boundary)

    def boundary_loop(self):
        """Boundary nodes ordered counterclockwise by angle about the origin (2D)."""
        if self.dim != 2:
            raise ValueError("boundary loop ordering is 2D only")
        if self._boundary_loop is None:
            ii, jj = np.nonzero(self.boundary)
            x = self.axis_coords(0)[ii]
            y = self.axis_coords(1)[jj]
            order = np.argsort(np.arctan2(y, x), kind="stable")
            self._boundary_loop = np.stack([ii[order], jj[order]], axis=1)
        return self._boundary_loop

    def standoff_mask(self, cells):
        """Inside nodes at least `cells` erosion steps from the outside."""
        from scipy import ndimage

        if cells <= 0:
            return self.inside.copy()
        structure = ndimage.generate_binary_structure(self.dim, 1)
        return ndimage.binary_erosion(self.inside, structure=structure, iterations=int(cells))


def build_domain(shape, resolution, radius=None, side=None):
    """Construct a masked grid for one of the supported domain shapes.

    shape: 'square' or 'disk' (2D), 'box' or 'ball' (3D).
    resolution: nodes per axis (>= 16).
    """
    if resolution < MIN_RESOLUTION:
        raise ValueError(f"resolution must be at least {MIN_RESOLUTION} nodes per axis")
    shape = shape.lower()
    if shape in ("square", "box"):
        if side is None or side <= 0.0:
            raise ValueError("side must be positive")
        dim = 2 if shape == "square" else 3
        n = int(resolution)
        h = side / (n - 1)
        mask = np.full((n,) * dim, INTERIOR, dtype=np.uint8)
        for ax in range(dim):
            face = [slice(None)] * dim
            face[ax] = 0
            mask[tuple(face)] = BOUNDARY
            face[ax] = -1
            mask[tuple(face)] = BOUNDARY
        origin = (-side / 2.0,) * dim
        return Grid(dim, (n,) * dim, h, mask, origin, shape, {"side": side})
    if shape in ("disk", "ball"):
        if radius is None or radius <= 0.0:
            raise ValueError("radius must be positive")
        dim = 2 if shape == "disk" else 3
        n = int(resolution)
        h = 2.0 * radius / (n - 1)
        coords = -radius + h * np.arange(n)
        mesh = np.meshgrid(*([coords] * dim), indexing="ij")
        r2 = sum(c * c for c in mesh)
        inside = r2 <= radius * radius + 1e-12 * radius * radius
        boundary = np.zeros_like(inside)
        for ax in range(dim):
            for shift in (1, -1):
                nb = np.roll(inside, shift, axis=ax)
                edge = [slice(None)] * dim
                edge[ax] = 0 if shift == 1 else -1
                nb[tuple(edge)] = False
                boundary |= inside & ~nb
        mask = np.zeros((n,) * dim, dtype=np.uint8)
        mask[inside] = INTERIOR
        mask[boundary] = BOUNDARY
        origin = (-radius,) * dim
        return Grid(dim, (n,) * dim, h, mask, origin, shape, {"radius": radius})
    raise ValueError(f"unknown domain shape {shape!r}")


def laplacian(grid: Grid, arr):
    """Central 5-point (2D) / 7-point (3D) Laplacian, zero off the interior.

    `arr` may carry trailing component axes.  Exact on affine fields and on
    the mixed quadratic x1*x2; equals the analytic value on pure quadratics.
    """
    a = np.asarray(arr, dtype=float)
    acc = -2.0 * grid.dim * a
    for ax in range(grid.dim):
        acc = acc + (np.roll(a, 1, axis=ax) + np.roll(a, -1, axis=ax))
    out = np.zeros_like(a)
    sel = grid.interior
    if a.ndim > grid.dim:
        sel = grid.interior[(...,) + (None,) * (a.ndim - grid.dim)]
        sel = np.broadcast_to(sel, a.shape)
    np.copyto(out, acc / (grid.h * grid.h), where=sel)
    return out


def axis_slices(grid: Grid, ax):
    """Index helpers for forward-difference edges along an axis."""
    lo = [slice(None)] * grid.dim
    hi = [slice(None)] * grid.dim
    lo[ax] = slice(0, -1)
    hi[ax] = slice(1, None)
    return tuple(lo), tuple(hi)
