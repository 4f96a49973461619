"""Algebra on symmetric traceless order-parameter tensors.

Conventions
-----------
A symmetric traceless 3x3 tensor is stored as five coefficients in the
orthonormal basis (orthonormal under the inner product ``tr(A B)``)

    E1 = diag(-1, -1, 2) / sqrt(6)
    E2 = diag(1, -1, 0) / sqrt(2)
    E3 = (ex ey' + ey ex') / sqrt(2)
    E4 = (ex ez' + ez ex') / sqrt(2)
    E5 = (ey ez' + ez ey') / sqrt(2)

so that ``|Q|^2 = tr(Q^2) = sum(c_i^2)``.  Symmetry and tracelessness are
structural: every coefficient vector is a valid tensor.  Arrays of tensors
carry the coefficient axis last.

The 2D reduction stores a symmetric traceless 2x2 matrix as
``c = sqrt(2) * (Q11, Q12)``, again with ``|Q|^2 = c1^2 + c2^2``.  There is
no cubic trace invariant in 2D, so the cubic bulk term is structurally
absent from every 2D code path.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

_SQRT2 = np.sqrt(2.0)
_SQRT6 = np.sqrt(6.0)

BASIS = np.zeros((5, 3, 3))
BASIS[0] = np.diag([-1.0, -1.0, 2.0]) / _SQRT6
BASIS[1] = np.diag([1.0, -1.0, 0.0]) / _SQRT2
BASIS[2, 0, 1] = BASIS[2, 1, 0] = 1.0 / _SQRT2
BASIS[3, 0, 2] = BASIS[3, 2, 0] = 1.0 / _SQRT2
BASIS[4, 1, 2] = BASIS[4, 2, 1] = 1.0 / _SQRT2
BASIS.setflags(write=False)

# tr(Ea Eb Ec); contracting three coefficient vectors with this gives tr(Q^3)
_TRIPLE = np.einsum("aij,bjk,cki->abc", BASIS, BASIS, BASIS)
_TRIPLE.setflags(write=False)

UNIT_NORM_TOL = 1e-10


def to_matrix(coeffs):
    """Reconstruct the symmetric traceless 3x3 matrix from basis coefficients."""
    c = np.asarray(coeffs, dtype=float)
    return np.einsum("...a,aij->...ij", c, BASIS)


def from_matrix(mat):
    """Project a symmetric traceless 3x3 matrix onto the coefficient basis."""
    m = np.asarray(mat, dtype=float)
    return np.einsum("...ij,aij->...a", m, BASIS)


def trace2(coeffs):
    c = np.asarray(coeffs, dtype=float)
    return np.sum(c * c, axis=-1)


def trace3(coeffs):
    c = np.asarray(coeffs, dtype=float)
    return np.einsum("abc,...a,...b,...c->...", _TRIPLE, c, c, c)


def make_uniaxial(s, n):
    """Coefficients of ``s (n n' - I/3)`` for a unit director n.

    Both arguments broadcast; ``n`` carries its 3 components on the last
    axis and must be unit length to within 1e-10.
    """
    s = np.asarray(s, dtype=float)
    n = np.asarray(n, dtype=float)
    norm2 = np.sum(n * n, axis=-1)
    if np.any(np.abs(np.sqrt(norm2) - 1.0) > UNIT_NORM_TOL):
        raise ValueError("director must be unit length (|n| = 1 within 1e-10)")
    n1, n2, n3 = n[..., 0], n[..., 1], n[..., 2]
    return np.stack(
        [
            s * (3.0 * n3 * n3 - 1.0) / _SQRT6,
            s * (n1 * n1 - n2 * n2) / _SQRT2,
            s * _SQRT2 * n1 * n2,
            s * _SQRT2 * n1 * n3,
            s * _SQRT2 * n2 * n3,
        ],
        axis=-1,
    )


def planar_coeffs(s, n):
    """2D coefficients of ``s (n n' - I/2)`` for a unit planar director.

    Uses the double-angle identities, so the result is an exact algebraic
    function of the director components (no trigonometric calls).
    """
    s = np.asarray(s, dtype=float)
    n = np.asarray(n, dtype=float)
    norm2 = np.sum(n * n, axis=-1)
    if np.any(np.abs(np.sqrt(norm2) - 1.0) > UNIT_NORM_TOL):
        raise ValueError("director must be unit length (|n| = 1 within 1e-10)")
    n1, n2 = n[..., 0], n[..., 1]
    # Q11 = (s/2) cos 2phi, Q12 = (s/2) sin 2phi, stored as sqrt(2)*(Q11, Q12)
    return np.stack(
        [s * (n1 * n1 - n2 * n2) / _SQRT2, s * _SQRT2 * n1 * n2],
        axis=-1,
    )


@dataclass(frozen=True)
class MaterialParams:
    """Bulk coefficients, elastic constant and derived bulk quantities.

    The additive gauge constant is pinned so the minimum of the bulk
    potential is exactly zero, which makes energy tables comparable
    across parameter sets.
    """

    a2: float
    b2: float
    c2: float
    L: float

    def __post_init__(self):
        for name in ("a2", "b2", "c2", "L"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")

    @property
    def bulk_root(self):
        """sqrt(b^4 + 24 a^2 c^2), the discriminant root of the amplitude quadratic."""
        return np.sqrt(self.b2 * self.b2 + 24.0 * self.a2 * self.c2)

    @property
    def s_plus(self):
        return (self.b2 + self.bulk_root) / (4.0 * self.c2)

    @property
    def s_minus(self):
        return (self.b2 - self.bulk_root) / (4.0 * self.c2)

    @property
    def gauge(self):
        sp = self.s_plus
        return self.a2 * sp**2 / 3.0 + 2.0 * self.b2 * sp**3 / 27.0 - self.c2 * sp**4 / 9.0

    @property
    def s_plus_2d(self):
        """Bulk-minimizing amplitude of the 2D reduction Q = s (n n' - I/2)."""
        return np.sqrt(2.0 * self.a2 / self.c2)

    @property
    def gauge_2d(self):
        return self.a2 * self.a2 / (4.0 * self.c2)

    def s_plus_for(self, dim):
        return self.s_plus if dim == 3 else self.s_plus_2d

    def q_norm_bound(self, dim):
        """Maximum-principle bound on |Q| for stationary fields."""
        if dim == 3:
            return np.sqrt(2.0 / 3.0) * self.s_plus
        return np.sqrt(self.a2 / self.c2)

    def with_L(self, L):
        return replace(self, L=L)


def s_roots(p: MaterialParams):
    """Roots (s_plus, s_minus) of 2 c^2 s^2 - b^2 s - 3 a^2 = 0."""
    return p.s_plus, p.s_minus


def bulk_energy(coeffs, p: MaterialParams):
    """Gauged bulk potential density; >= 0 everywhere, = 0 on the vacuum set.

    Dimensionality is inferred from the trailing axis (5 -> 3D, 2 -> 2D).
    In 2D the cubic invariant vanishes identically and the cubic term is
    never evaluated.
    """
    c = np.asarray(coeffs, dtype=float)
    t2 = trace2(c)
    if c.shape[-1] == 5:
        t3 = trace3(c)
        return p.gauge - 0.5 * p.a2 * t2 - (p.b2 / 3.0) * t3 + 0.25 * p.c2 * t2 * t2
    if c.shape[-1] == 2:
        return p.gauge_2d - 0.5 * p.a2 * t2 + 0.25 * p.c2 * t2 * t2
    raise ValueError("expected 5 (3D) or 2 (2D) coefficients on the last axis")


def bulk_gradient(coeffs, p: MaterialParams):
    """Derivative of the bulk potential with respect to the coefficients.

    Equals the traceless projection of d f_B / d Q expressed in the basis;
    it vanishes on the vacuum set and at Q = 0.
    """
    c = np.asarray(coeffs, dtype=float)
    t2 = trace2(c)[..., None]
    if c.shape[-1] == 5:
        sq = np.einsum("abc,...b,...c->...a", _TRIPLE, c, c)
        return -p.a2 * c - p.b2 * sq + p.c2 * t2 * c
    if c.shape[-1] == 2:
        return -p.a2 * c + p.c2 * t2 * c
    raise ValueError("expected 5 (3D) or 2 (2D) coefficients on the last axis")


def uniaxial_bulk(s, p: MaterialParams, dim=3):
    """Bulk potential restricted to the uniaxial slice of amplitude s."""
    s = np.asarray(s, dtype=float)
    if dim == 3:
        return (
            p.gauge
            - p.a2 * s**2 / 3.0
            - 2.0 * p.b2 * s**3 / 27.0
            + p.c2 * s**4 / 9.0
        )
    return p.gauge_2d - p.a2 * s**2 / 4.0 + p.c2 * s**4 / 16.0


def uniaxial_bulk_grad(s, p: MaterialParams, dim=3):
    s = np.asarray(s, dtype=float)
    if dim == 3:
        return -2.0 * p.a2 * s / 3.0 - 2.0 * p.b2 * s**2 / 9.0 + 4.0 * p.c2 * s**3 / 9.0
    return -p.a2 * s / 2.0 + p.c2 * s**3 / 4.0


def biaxiality(coeffs):
    """Biaxiality parameter 1 - 6 tr(Q^3)^2 / |Q|^6, clamped to [0, 1].

    Zero exactly on uniaxial tensors, one when tr(Q^3) = 0.  Undefined at
    Q = 0; callers must mask isotropic points first.
    """
    c = np.asarray(coeffs, dtype=float)
    if c.shape[-1] != 5:
        raise ValueError("biaxiality is defined for 3D tensors (5 coefficients)")
    t2 = trace2(c)
    if np.any(t2 == 0.0):
        raise ValueError("biaxiality undefined at Q = 0; mask isotropic points")
    t3 = trace3(c)
    return np.clip(1.0 - 6.0 * t3 * t3 / t2**3, 0.0, 1.0)


@dataclass
class SpectralDecomp:
    """Eigensystem plus the two-amplitude representation of a Q-tensor.

    ``eigenvalues`` are sorted descending and sum to zero; ``eigenvectors``
    holds the corresponding frame as rows (n, m, p), right-handed.  The
    amplitudes satisfy ``Q = s_l (n n' - I/3) + r_l (m m' - p p')`` with
    ``lambda_1 = 2 s_l / 3``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    s_l: np.ndarray
    r_l: np.ndarray
    uniaxial: np.ndarray
    isotropic: np.ndarray

    def reconstruct(self):
        n = self.eigenvectors[..., 0, :]
        m = self.eigenvectors[..., 1, :]
        p = self.eigenvectors[..., 2, :]
        eye = np.eye(3)
        sl = self.s_l[..., None, None]
        rl = self.r_l[..., None, None]
        mat = sl * (n[..., :, None] * n[..., None, :] - eye / 3.0)
        mat += rl * (m[..., :, None] * m[..., None, :] - p[..., :, None] * p[..., None, :])
        return from_matrix(mat)


_ISO_NORM_TOL = 1e-14
_DEGENERACY_TOL = 1e-9


def _fix_sign(v):
    # first component of magnitude > 1e-8 made positive; n and -n are identified
    mag = np.abs(v)
    first = np.argmax(mag > 1e-8, axis=-1)
    lead = np.take_along_axis(v, first[..., None], axis=-1)[..., 0]
    sign = np.where(lead < 0.0, -1.0, 1.0)
    return v * sign[..., None]


def _project_reference(distinct):
    # standard axis most orthogonal to `distinct`, projected onto its plane
    dots = np.abs(distinct)
    ref_idx = np.argmin(dots, axis=-1)
    ref = np.zeros_like(distinct)
    np.put_along_axis(ref, ref_idx[..., None], 1.0, axis=-1)
    proj = ref - np.sum(ref * distinct, axis=-1)[..., None] * distinct
    return proj / np.linalg.norm(proj, axis=-1)[..., None]


def decompose(coeffs, tol=1e-8):
    """Eigendecomposition with deterministic frames and the (S, R) amplitudes.

    Degenerate eigenvector pairs are realigned against the standard frame
    (Gram-Schmidt of the most orthogonal axis), signs are fixed by the
    first significant component, and the frame is completed right-handed.
    A tensor is flagged uniaxial when ``r_l <= tol * |Q|`` and isotropic
    when ``|Q|`` vanishes.
    """
    c = np.asarray(coeffs, dtype=float)
    mat = to_matrix(c)
    w, v = np.linalg.eigh(mat)
    w = w[..., ::-1]
    vecs = np.swapaxes(v, -1, -2)[..., ::-1, :]  # rows, descending eigenvalue

    norm = np.sqrt(trace2(c))
    iso = norm <= _ISO_NORM_TOL
    scale = np.maximum(norm, 1.0)

    gap12 = w[..., 0] - w[..., 1]
    gap23 = w[..., 1] - w[..., 2]
    deg = _DEGENERACY_TOL * scale

    n = vecs[..., 0, :].copy()
    m = vecs[..., 1, :].copy()
    p = vecs[..., 2, :].copy()

    # prolate-degenerate: lambda2 ~ lambda3, n distinct
    sel = (gap23 <= deg) & (gap12 > deg)
    if np.any(sel):
        m_new = _project_reference(n)
        m = np.where(sel[..., None], m_new, m)
    # oblate-degenerate: lambda1 ~ lambda2, p distinct
    sel = (gap12 <= deg) & (gap23 > deg)
    if np.any(sel):
        n_new = _project_reference(p)
        n = np.where(sel[..., None], n_new, n)
        m = np.where(sel[..., None], np.cross(p, n_new), m)
    # near-isotropic: any frame is near-eigen, use the identity
    sel = (gap12 <= deg) & (gap23 <= deg)
    if np.any(sel):
        eye = np.broadcast_to(np.eye(3), n.shape[:-1] + (3, 3))
        n = np.where(sel[..., None], eye[..., 0, :], n)
        m = np.where(sel[..., None], eye[..., 1, :], m)

    n = _fix_sign(n)
    m = _fix_sign(m - np.sum(m * n, axis=-1)[..., None] * n)
    m = m / np.linalg.norm(m, axis=-1)[..., None]
    p = np.cross(n, m)

    s_l = 1.5 * w[..., 0]
    r_l = 0.5 * (w[..., 1] - w[..., 2])
    zero = np.zeros_like(s_l)
    s_l = np.where(iso, zero, s_l)
    r_l = np.where(iso, zero, r_l)
    w = np.where(iso[..., None], np.zeros_like(w), w)
    uniax = np.abs(r_l) <= tol * np.maximum(norm, _ISO_NORM_TOL)

    frame = np.stack([n, m, p], axis=-2)
    return SpectralDecomp(
        eigenvalues=w,
        eigenvectors=frame,
        s_l=s_l,
        r_l=r_l,
        uniaxial=uniax,
        isotropic=iso,
    )


@dataclass(frozen=True)
class QTensor3:
    """Convenience wrapper around a single 5-coefficient tensor."""

    coeffs: np.ndarray

    @classmethod
    def uniaxial(cls, s, n):
        return cls(make_uniaxial(float(s), np.asarray(n, dtype=float)))

    @classmethod
    def from_matrix(cls, mat):
        return cls(from_matrix(mat))

    @property
    def matrix(self):
        return to_matrix(self.coeffs)

    @property
    def norm(self):
        return float(np.sqrt(trace2(self.coeffs)))

    def decompose(self, tol=1e-8):
        return decompose(self.coeffs, tol=tol)


@dataclass(frozen=True)
class QTensor2:
    """Symmetric traceless 2x2 tensor as (Q11, Q12)."""

    q1: float
    q2: float

    @property
    def coeffs(self):
        return np.array([_SQRT2 * self.q1, _SQRT2 * self.q2])

    @classmethod
    def from_coeffs(cls, c):
        return cls(float(c[0]) / _SQRT2, float(c[1]) / _SQRT2)

    @property
    def norm(self):
        return float(np.sqrt(2.0 * (self.q1**2 + self.q2**2)))

    @property
    def amplitude(self):
        """Amplitude s of Q = s (n n' - I/2); equals 2 lambda."""
        return 2.0 * float(np.sqrt(self.q1**2 + self.q2**2))
