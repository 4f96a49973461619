"""Cross-run behavior of the continuation pipelines at small desk scale."""

import numpy as np
import pytest

from qtensor.asympt import (
    RegionSpec,
    biaxiality_report,
    boundary_energy_diagnostic,
    default_boundary_samples,
    psi_field,
    verify_lemma7,
)
from qtensor.fields import boundary_director, uniaxial_fields
from qtensor.grid import build_domain
from qtensor.minimize import MinimizeOptions, continuation
from qtensor.tensor import MaterialParams


@pytest.fixture(scope="module")
def small_hedgehog():
    grid = build_domain("ball", 24, radius=1.0)
    bd = boundary_director(grid, "radial")
    p = MaterialParams(a2=1.0, b2=1.0, c2=1.0, L=0.02)
    opts = MinimizeOptions(mode="uniaxial", method="nonlinear-cg", grad_tol=2e-3, dt=1e-4)
    recs = continuation(grid, bd, p, [0.02, 0.01], opts)
    return grid, p, recs


@pytest.fixture(scope="module")
def small_full_hedgehog():
    grid = build_domain("ball", 24, radius=1.0)
    bd = boundary_director(grid, "radial")
    p = MaterialParams(a2=1.0, b2=1.0, c2=1.0, L=0.02)
    opts = MinimizeOptions(mode="full", method="nonlinear-cg", grad_tol=2e-3, dt=1e-4)
    recs = continuation(grid, bd, p, [0.02, 0.01], opts)
    return grid, p, recs


def region(grid):
    return RegionSpec(delta=0.4, standoff=2).build_mask(grid, [np.zeros(3)])


class TestUniaxialContinuation:
    def test_sup_psi_stable_across_L(self, small_hedgehog):
        grid, p, recs = small_hedgehog
        mask = region(grid)
        sups = [
            float(np.abs(psi_field(rec.s, p.with_L(rec.L), 3))[mask].max()) for rec in recs
        ]
        # psi is bounded as L -> 0: the two runs agree within 30%
        assert abs(sups[1] - sups[0]) / sups[0] < 0.3

    def test_gradient_decay(self, small_hedgehog):
        grid, p, recs = small_hedgehog
        mask = region(grid)
        sups = []
        for rec in recs:
            gs, _ = verify_lemma7(rec.s, rec.director, rec.director, mask)
            sups.append(gs)
        # |grad s| decreases when L halves (10% slack)
        assert sups[1] <= sups[0] * 1.1

    def test_boundary_energy_uniform_bound(self, small_hedgehog):
        grid, p, recs = small_hedgehog
        samples = default_boundary_samples(grid)
        vals = []
        for rec in recs:
            vals.append(
                boundary_energy_diagnostic(rec.field, p.with_L(rec.L), samples, 6 * grid.h)
            )
        # the scaled near-boundary energy stays within a factor 2 across runs
        assert max(vals) <= 2.0 * min(vals)


class TestFullContinuation:
    def test_biaxiality_decreases(self, small_full_hedgehog):
        grid, p, recs = small_full_hedgehog
        mask = region(grid)
        betas, gaps = [], []
        for rec in recs:
            beta, gap, _ = biaxiality_report(rec.field, p.with_L(rec.L), mask)
            betas.append(beta)
            gaps.append(gap)
        assert betas[1] <= betas[0] * 1.1
        # gap ~ C L: the ratio gap/L stays within a factor 2 between runs
        q = (gaps[0] / recs[0].L) / (gaps[1] / recs[1].L)
        assert 0.5 <= q <= 2.0

    def test_uniaxial_energy_upper_bounds_full(self, small_hedgehog, small_full_hedgehog):
        # the unconstrained minimum cannot exceed the uniaxial-slice minimum
        _, _, uni = small_hedgehog
        _, _, full = small_full_hedgehog
        for ru, rf in zip(uni, full):
            assert rf.energy <= ru.energy + 1e-9 * max(1.0, abs(ru.energy))


class TestPlanarContinuation:
    def test_amplitude_gap_halves_with_L(self):
        grid = build_domain("disk", 96, radius=1.0)
        bd = boundary_director(grid, "planar-degree", degree=1)
        p = MaterialParams(a2=1.0, b2=1.0, c2=1.0, L=0.04)
        opts = MinimizeOptions(mode="full", method="nonlinear-cg", grad_tol=2e-3, dt=1e-4)
        recs = continuation(grid, bd, p, [0.04, 0.02], opts)
        r = grid.radii()
        ann = grid.interior & (r >= 0.5) & (r <= 0.9)
        sups = []
        for rec in recs:
            pL = p.with_L(rec.L)
            u = uniaxial_fields(rec.field)
            sups.append(float((pL.s_plus_2d - u.s)[ann].max()))
        ratio = sups[0] / sups[1]
        assert 1.6 <= ratio <= 2.4  # halving within +-20%
