import numpy as np
import pytest

from qtensor.asympt import (
    RegionSpec,
    biaxiality_report,
    boundary_energy_diagnostic,
    check_max_principle,
    prop4_prediction,
    psi_field,
    verify_lemma7,
    verify_prop4,
)
from qtensor.fields import DirectorField, Field, uniaxial_fields
from qtensor.grid import build_domain
from qtensor.tensor import MaterialParams, make_uniaxial, planar_coeffs

UNIT = MaterialParams(a2=1.0, b2=1.0, c2=1.0, L=1.0)


def constant_director(grid):
    n = np.zeros(grid.shape + (grid.dim,))
    n[..., grid.dim - 1] = 1.0
    n[~grid.inside] = 0.0
    return DirectorField(grid, n, check=False)


class TestPsiField:
    def test_vacuum_is_zero(self):
        s = np.full((4, 4, 4), UNIT.s_plus)
        assert np.allclose(psi_field(s, UNIT), 0.0)

    def test_constructed_unit_gap(self):
        p = MaterialParams(a2=1.0, b2=1.0, c2=1.0, L=0.25)
        s = np.full((4,), p.s_plus - p.L)
        assert np.allclose(psi_field(s, p), 1.0)


class TestVerifyProp4:
    def test_constant_director_both_sides_vanish(self):
        g = build_domain("ball", 17, radius=1.0)
        n0 = constant_director(g)
        s = np.full(g.shape, UNIT.s_plus)
        mask = RegionSpec().build_mask(g)
        out = verify_prop4(s, n0, UNIT, mask)
        assert out["sup_err"] < 1e-12
        assert out["sup_psi"] < 1e-12

    def test_constructed_exact_profile(self):
        # build s so that psi equals the limit profile exactly
        g = build_domain("ball", 25, radius=1.0)
        p = MaterialParams(a2=1.0, b2=1.0, c2=1.0, L=0.01)
        ang = 0.5 * g.positions[..., 0]
        n = np.stack([np.cos(ang), np.sin(ang), np.zeros_like(ang)], axis=-1)
        n[~g.inside] = 0.0
        n0 = DirectorField(g, n, check=False)
        from qtensor.fields import director_gradsq

        pred = prop4_prediction(director_gradsq(g, n0), p, 3)
        s = p.s_plus - p.L * pred
        mask = RegionSpec().build_mask(g)
        out = verify_prop4(s, n0, p, mask)
        assert out["sup_err"] < 1e-12

    def test_empty_region_rejected(self):
        g = build_domain("ball", 17, radius=1.0)
        with pytest.raises(ValueError):
            verify_prop4(np.zeros(g.shape), constant_director(g), UNIT, np.zeros(g.shape, bool))


class TestVerifyLemma7:
    def test_trivial_zeros(self):
        g = build_domain("ball", 17, radius=1.0)
        n0 = constant_director(g)
        s = np.full(g.shape, UNIT.s_plus)
        mask = RegionSpec().build_mask(g)
        gs, gn = verify_lemma7(s, n0, n0, mask)
        assert gs == 0.0
        assert gn == 0.0


class TestMaxPrinciple:
    def test_vacuum_attains_bound(self):
        g = build_domain("ball", 17, radius=1.0)
        f = Field.constant(g, make_uniaxial(UNIT.s_plus, np.array([0.0, 0.0, 1.0])))
        assert abs(check_max_principle(f, UNIT)) < 1e-12

    def test_scaled_field_excess(self):
        g = build_domain("ball", 17, radius=1.0)
        f = Field.constant(g, 1.1 * make_uniaxial(UNIT.s_plus, np.array([0.0, 0.0, 1.0])))
        expect = 0.1 * np.sqrt(2.0 / 3.0) * UNIT.s_plus
        assert abs(check_max_principle(f, UNIT) - expect) < 1e-12

    def test_2d_bound_is_vacuum_norm(self):
        g = build_domain("disk", 32, radius=1.0)
        n = np.zeros(g.shape + (2,))
        n[..., 0] = 1.0
        f = Field(g, planar_coeffs(np.full(g.shape, UNIT.s_plus_2d), n))
        assert abs(check_max_principle(f, UNIT)) < 1e-12


class TestBiaxialityReport:
    def test_uniaxial_field_is_clean(self):
        g = build_domain("ball", 17, radius=1.0)
        f = Field.constant(g, make_uniaxial(UNIT.s_plus, np.array([0.0, 0.0, 1.0])))
        mask = RegionSpec().build_mask(g)
        beta, gap, rl2 = biaxiality_report(f, UNIT, mask)
        assert beta < 1e-10
        assert abs(gap) < 1e-12
        assert rl2 < 1e-20

    def test_lambda1_gap_tracks_amplitude(self):
        g = build_domain("ball", 17, radius=1.0)
        s = 0.9 * UNIT.s_plus
        f = Field.constant(g, make_uniaxial(s, np.array([0.0, 0.0, 1.0])))
        mask = RegionSpec().build_mask(g)
        _, gap, _ = biaxiality_report(f, UNIT, mask)
        assert np.isclose(gap, 2.0 * (UNIT.s_plus - s) / 3.0, rtol=1e-12)


class TestBoundaryDiagnostic:
    def test_vacuum_zero(self):
        g = build_domain("ball", 17, radius=1.0)
        f = Field.constant(g, make_uniaxial(UNIT.s_plus, np.array([0.0, 0.0, 1.0])))
        out = boundary_energy_diagnostic(f, UNIT, [np.array([1.0, 0.0, 0.0])], 6 * g.h)
        assert out < 1e-12

    def test_r_scaling_inequality(self):
        g = build_domain("ball", 25, radius=1.0)
        ang = 0.8 * g.positions[..., 0]
        n = np.stack([np.cos(ang), np.sin(ang), np.zeros_like(ang)], axis=-1)
        vals = make_uniaxial(np.full(g.shape, UNIT.s_plus), n)
        vals[~g.inside] = 0.0
        f = Field(g, vals)
        x0 = np.array([1.0, 0.0, 0.0])
        r = 4 * g.h
        a = boundary_energy_diagnostic(f, UNIT, [x0], r)
        b = boundary_energy_diagnostic(f, UNIT, [x0], 2 * r)
        # by definition: (2r)^2 sup_{r} <= 4 * r^2 sup_{r} * (sup ratio)
        sup_ratio = b / (4 * a) if a > 0 else 1.0
        assert b <= 4.0 * a * max(sup_ratio, 1.0) + 1e-12

    def test_small_radius_rejected(self):
        g = build_domain("ball", 17, radius=1.0)
        f = Field.constant(g, make_uniaxial(UNIT.s_plus, np.array([0.0, 0.0, 1.0])))
        with pytest.raises(ValueError):
            boundary_energy_diagnostic(f, UNIT, [np.array([1.0, 0.0, 0.0])], 2 * g.h)


class TestRegionSpec:
    def test_delta_floor(self):
        g = build_domain("ball", 17, radius=1.0)
        with pytest.raises(ValueError):
            RegionSpec(delta=0.5 * g.h).build_mask(g, [np.zeros(3)])

    def test_exclusion_and_standoff(self):
        g = build_domain("ball", 25, radius=1.0)
        mask = RegionSpec(delta=0.4, standoff=2).build_mask(g, [np.zeros(3)])
        r = g.radii()
        assert not np.any(mask & (r <= 0.4))
        assert np.any(mask)

    def test_auto_delta_uses_core_radius(self):
        g = build_domain("ball", 25, radius=1.0)
        spec = RegionSpec()
        assert np.isclose(spec.resolve_delta(g, core_radius=0.3), 0.6)
        assert np.isclose(spec.resolve_delta(g, core_radius=0.01), 3 * g.h)
