import numpy as np
import pytest

from qtensor.defects import (
    DefectRecord,
    enclosing_loop,
    fit_core_exponents,
    isotropic_set,
    locate_defects,
    rectangle_loop,
    renormalized_energy_disk,
    winding_number,
)
from qtensor.fields import Field, uniaxial_fields
from qtensor.grid import build_domain
from qtensor.tensor import MaterialParams, make_uniaxial, planar_coeffs

UNIT = MaterialParams(a2=1.0, b2=1.0, c2=1.0, L=1.0)


def vortex_field(grid, p, ramp_radius=0.3):
    """Planar degree-1 director vortex with a linearly ramped amplitude."""
    x, y = grid.positions[..., 0], grid.positions[..., 1]
    r = np.sqrt(x * x + y * y)
    s = p.s_plus_2d * np.minimum(r / ramp_radius, 1.0)
    safe = np.maximum(r, 1e-300)
    n = np.stack([x / safe, y / safe], axis=-1)
    n[r == 0.0] = [1.0, 0.0]
    vals = planar_coeffs(s, n)
    vals[~grid.inside] = 0.0
    return Field(grid, vals)


def hedgehog_field(grid, p, ramp_radius=0.3):
    r = grid.radii()
    s = p.s_plus * np.minimum(r / ramp_radius, 1.0)
    safe = np.maximum(r, 1e-300)
    n = grid.positions / safe[..., None]
    n[r == 0.0] = [0.0, 0.0, 1.0]
    vals = make_uniaxial(s, n)
    vals[~grid.inside] = 0.0
    return Field(grid, vals)


class TestIsotropicSet:
    def test_vacuum_empty(self):
        g = build_domain("disk", 32, radius=1.0)
        s = np.full(g.shape, UNIT.s_plus_2d)
        assert isotropic_set(g, s, 0.3, UNIT.s_plus_2d) == []

    def test_ramp_has_single_component_at_origin(self):
        g = build_domain("disk", 64, radius=1.0)
        r = g.radii()
        s = UNIT.s_plus_2d * np.minimum(r / 0.1, 1.0)
        comps = isotropic_set(g, s, 0.3, UNIT.s_plus_2d)
        assert len(comps) == 1
        assert np.linalg.norm(comps[0].centroid) < g.h
        assert not comps[0].touches_boundary

    def test_frac_validation(self):
        g = build_domain("disk", 32, radius=1.0)
        with pytest.raises(ValueError):
            isotropic_set(g, np.zeros(g.shape), 1.5, 1.0)


class TestWindingNumber:
    def test_boundary_windings_of_vortex(self):
        g = build_domain("disk", 64, radius=1.0)
        f = vortex_field(g, UNIT)
        u = uniaxial_fields(f)
        loop = g.boundary_loop()
        assert winding_number(g, f.values, loop, kind="q") == 2
        assert winding_number(g, u.director.values, loop, kind="director") == 1.0

    def test_constant_field_zero(self):
        g = build_domain("disk", 48, radius=1.0)
        vals = np.tile([0.7, 0.2], g.shape + (1,))
        loop = g.boundary_loop()
        assert winding_number(g, vals, loop, kind="q") == 0

    def test_plaquette_sum_telescopes(self):
        # generic vortex position: steps of exactly pi (orientation-ambiguous)
        # only occur for a core perfectly centered on a plaquette
        g = build_domain("square", 32, side=2.0)
        x = g.positions[..., 0] - 0.31 * g.h
        y = g.positions[..., 1] - 0.17 * g.h
        r = np.sqrt(x * x + y * y)
        s = UNIT.s_plus_2d * np.minimum(r / 0.3, 1.0)
        n = np.stack([x / r, y / r], axis=-1)
        f = Field(g, planar_coeffs(s, n))
        total = 0
        ii, jj = np.nonzero(g.inside[:-1, :-1] & g.inside[1:, :-1]
                            & g.inside[:-1, 1:] & g.inside[1:, 1:])
        for i, j in zip(ii, jj):
            loop = np.array([(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)])
            total += winding_number(g, f.values, loop, kind="q")
        outer = rectangle_loop(g, (0, 0), (g.shape[0] - 1, g.shape[1] - 1))
        assert total == winding_number(g, f.values, outer, kind="q")

    def test_zero_on_loop_rejected(self):
        g = build_domain("disk", 48, radius=1.0)
        vals = np.zeros(g.shape + (2,))
        with pytest.raises(ValueError):
            winding_number(g, vals, g.boundary_loop(), kind="q")

    def test_nonzero_winding_plaquettes_are_isotropic(self):
        # discrete version of: director defects live inside the isotropic set
        g = build_domain("square", 48, side=2.0)
        f = vortex_field(g, UNIT)
        u = uniaxial_fields(f)
        ii, jj = np.nonzero(g.inside[:-1, :-1] & g.inside[1:, :-1]
                            & g.inside[:-1, 1:] & g.inside[1:, 1:])
        for i, j in zip(ii, jj):
            loop = np.array([(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)])
            w = winding_number(g, f.values, loop, kind="q")
            if w != 0:
                corners = u.s[loop[:, 0], loop[:, 1]]
                assert corners.min() < 0.5 * UNIT.s_plus_2d


class TestLocateDefects:
    def test_2d_synthetic_vortex(self):
        g = build_domain("disk", 96, radius=1.0)
        f = vortex_field(g, UNIT)
        recs = locate_defects(f, UNIT)
        assert len(recs) == 1
        rec = recs[0]
        assert np.linalg.norm(rec.position) < 0.5 * g.h
        assert rec.q_winding == 2
        assert rec.director_winding == 1.0
        # amplitude ramp crosses s_plus/2 at r = 0.15
        assert abs(rec.core_radius - 0.15) < 2 * g.h

    def test_3d_synthetic_hedgehog(self):
        g = build_domain("ball", 49, radius=1.0)
        f = hedgehog_field(g, UNIT)
        recs = locate_defects(f, UNIT)
        assert len(recs) == 1
        rec = recs[0]
        assert np.linalg.norm(rec.position) < g.h
        assert rec.q_winding == 1.0
        assert rec.director_winding == 1.0
        assert abs(rec.fitted_alpha - 2.0) < 0.2

    def test_vacuum_field_no_records(self):
        g = build_domain("disk", 48, radius=1.0)
        n = np.zeros(g.shape + (2,))
        n[..., 0] = 1.0
        f = Field(g, planar_coeffs(np.full(g.shape, UNIT.s_plus_2d), n))
        assert locate_defects(f, UNIT) == []


class TestFitCoreExponents:
    def _record(self):
        return DefectRecord(
            position=np.zeros(3),
            q_winding=None,
            director_winding=None,
            core_radius=0.1,
            fitted_n=np.nan,
            fitted_alpha=np.nan,
            fit_residual=np.nan,
        )

    def test_exact_quadratic_power_law(self):
        g = build_domain("ball", 33, radius=1.0)
        r = g.radii()
        n = np.zeros(g.shape + (3,))
        n[..., 2] = 1.0
        vals = make_uniaxial(r * r, n)
        vals[~g.inside] = 0.0
        f = Field(g, vals)
        rec = self._record()
        fitted, _, resid = fit_core_exponents(f, rec, (2.5 * g.h, 0.6))
        assert abs(fitted - 2.0) < 1e-3
        assert resid < 1e-6

    def test_perturbed_power_law(self):
        g = build_domain("ball", 33, radius=1.0)
        r = g.radii()
        n = np.zeros(g.shape + (3,))
        n[..., 2] = 1.0
        s = r * (1.0 + 0.01 * r)
        vals = make_uniaxial(s, n)
        vals[~g.inside] = 0.0
        f = Field(g, vals)
        rec = self._record()
        fitted, _, _ = fit_core_exponents(f, rec, (2.5 * g.h, 0.6))
        # independent least-squares oracle on the analytic profile
        rs = np.linspace(2.5 * g.h, 0.6, 50)
        expect = np.polyfit(np.log(rs), np.log(rs * (1 + 0.01 * rs)), 1)[0]
        assert abs(expect - 1.0) < 0.05
        assert abs(fitted - 1.0) < 0.05
        assert abs(fitted - expect) < 0.02

    def test_radial_director_alpha(self):
        g = build_domain("ball", 33, radius=1.0)
        f = hedgehog_field(g, UNIT, ramp_radius=0.05)
        rec = self._record()
        _, alpha, _ = fit_core_exponents(f, rec, (2.5 * g.h, 0.45))
        assert abs(alpha - 2.0) / 2.0 < 0.05

    def test_too_few_shells_rejected(self):
        g = build_domain("ball", 33, radius=1.0)
        f = hedgehog_field(g, UNIT)
        with pytest.raises(ValueError):
            fit_core_exponents(f, self._record(), (2.5 * g.h, 2.5 * g.h + g.h))


class TestRenormalizedEnergy:
    def test_rotation_invariance(self):
        rng = np.random.default_rng(0)
        pts = np.array([[0.3, 0.1], [-0.2, 0.4], [0.1, -0.5]])
        deg = [1, 1, -1]
        w0 = renormalized_energy_disk(pts, deg)
        for _ in range(5):
            a = rng.uniform(0, 2 * np.pi)
            rot = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
            w1 = renormalized_energy_disk(pts @ rot.T, deg)
            assert abs(w1 - w0) < 1e-9 * max(1.0, abs(w0))

    def test_single_defect_argmin_is_center(self):
        # grid-search oracle over the disk
        best, best_w = None, np.inf
        for x in np.linspace(-0.9, 0.9, 37):
            for y in np.linspace(-0.9, 0.9, 37):
                if x * x + y * y >= 0.95**2:
                    continue
                w = renormalized_energy_disk([[x, y]], [1])
                if w < best_w:
                    best, best_w = (x, y), w
        assert np.linalg.norm(best) < 1e-12

    def test_two_same_sign_optimal_separation(self):
        # symmetric pair at +-r: analytic optimum at r = 5^(-1/4)
        rs = np.linspace(0.05, 0.95, 400)
        ws = [renormalized_energy_disk([[r, 0.0], [-r, 0.0]], [1, 1]) for r in rs]
        r_star = rs[int(np.argmin(ws))]
        assert abs(r_star - 5.0 ** (-0.25)) < 0.01

    def test_coincident_points_rejected(self):
        with pytest.raises(ValueError):
            renormalized_energy_disk([[0.1, 0.1], [0.1, 0.1]], [1, 1])

    def test_points_outside_disk_rejected(self):
        with pytest.raises(ValueError):
            renormalized_energy_disk([[1.2, 0.0]], [1])
