"""Finite-difference laboratory for Landau-de Gennes Q-tensor minimization."""

from .asympt import (
    AsymptoticsReport,
    RegionSpec,
    biaxiality_report,
    boundary_energy_diagnostic,
    check_max_principle,
    psi_field,
    verify_lemma7,
    verify_prop4,
)
from .defects import (
    DefectRecord,
    fit_core_exponents,
    isotropic_set,
    locate_defects,
    renormalized_energy_disk,
    winding_number,
)
from .fields import (
    BoundaryDirector,
    DirectorField,
    EnergyBreakdown,
    Field,
    boundary_director,
    normalized_ball_energy,
    total_energy,
    uniaxial_fields,
)
from .grid import Grid, build_domain, laplacian
from .harmonic import (
    canonical_harmonic_2d,
    limiting_map,
    minimize_dirichlet,
    singular_set,
)
from .minimize import (
    MinimizeOptions,
    RunRecord,
    SolverDivergence,
    continuation,
    discrete_gradient,
    minimize_full,
    minimize_uniaxial,
)
from .tensor import (
    MaterialParams,
    QTensor2,
    QTensor3,
    SpectralDecomp,
    biaxiality,
    bulk_energy,
    bulk_gradient,
    decompose,
    make_uniaxial,
    s_roots,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
