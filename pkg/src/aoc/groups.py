"""Matrix Lie group layer: exp, log and group-aware integration steps.

Group elements are plain ``(d, d)`` numpy arrays (leading batch
dimensions broadcast through ``compose``, ``exp_map`` and the
integrator).  Reconstruction always uses the left-translation form
``xdot = x @ hat(y)``, so one step of the fourth order Munthe-Kaas
scheme composes ``x`` with the exponential of a bracket-corrected
combination of the stage velocities and stays on the manifold up to the
accuracy of ``exp``.

so(3) uses closed forms (Rodrigues for exp, quaternion extraction for
log) with series fallbacks below angle 1e-4 to avoid cancellation; the
generic branch uses scaling and squaring on the exponential series and
delegates the logarithm to scipy.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import atan2, sqrt

import numpy as np
import scipy.linalg

from .algebra import LieAlgebraModel, bracket
from .errors import AngleOutOfRange, DimensionMismatch

SO3_MAX_LOG_ANGLE = np.pi - 1e-6


@dataclass(frozen=True, eq=False)
class GroupModel:
    """Matrix representation of the group integrating a LieAlgebraModel.

    ``basis`` holds the n generator matrices (the hat map); ``unhat_pinv``
    is the precomputed pseudo-inverse used to project a matrix in the
    span of the generators back to coordinates.
    """

    algebra: LieAlgebraModel
    rep_dim: int
    basis: np.ndarray
    kind: str  # "so3" | "abelian" | "generic"
    unhat_pinv: np.ndarray


def _make_group(model, basis, kind) -> GroupModel:
    basis = np.asarray(basis, dtype=float)
    n, d = model.n, basis.shape[-1]
    if basis.shape != (n, d, d):
        raise DimensionMismatch(f"basis matrices must have shape {(n, d, d)}, got {basis.shape}")
    pinv = np.linalg.pinv(basis.reshape(n, d * d).T)
    return GroupModel(algebra=model, rep_dim=d, basis=basis, kind=kind, unhat_pinv=pinv)


def so3_group(model) -> GroupModel:
    if model.n != 3:
        raise DimensionMismatch("so3 group needs a 3-dimensional algebra")
    basis = np.zeros((3, 3, 3))
    basis[0] = [[0, 0, 0], [0, 0, -1], [0, 1, 0]]
    basis[1] = [[0, 0, 1], [0, 0, 0], [-1, 0, 0]]
    basis[2] = [[0, -1, 0], [1, 0, 0], [0, 0, 0]]
    return _make_group(model, basis, "so3")


def abelian_group(model) -> GroupModel:
    """R^n as (n+1)x(n+1) translation matrices (identity plus last column)."""
    n = model.n
    basis = np.zeros((n, n + 1, n + 1))
    for i in range(n):
        basis[i, i, n] = 1.0
    return _make_group(model, basis, "abelian")


def generic_group(model, basis_matrices) -> GroupModel:
    return _make_group(model, basis_matrices, "generic")


def hat(gm, y) -> np.ndarray:
    """Map coordinates to the matrix representation."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1:] != (gm.algebra.n,):
        raise DimensionMismatch(f"expected {gm.algebra.n} components, got shape {y.shape}")
    return np.einsum("...i,ijk->...jk", y, gm.basis)


def unhat(gm, M) -> np.ndarray:
    """Project a matrix in the span of the generators back to coordinates."""
    M = np.asarray(M, dtype=float)
    d = gm.rep_dim
    return np.einsum("ij,...j->...i", gm.unhat_pinv, M.reshape(M.shape[:-2] + (d * d,)))


def identity(gm) -> np.ndarray:
    return np.eye(gm.rep_dim)


def compose(a, b) -> np.ndarray:
    return np.matmul(a, b)


def inverse(gm, g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if gm.kind == "so3":
        return np.swapaxes(g, -1, -2)
    if gm.kind == "abelian":
        n = gm.algebra.n
        out = g.copy()
        out[..., :n, n] = -g[..., :n, n]
        return out
    return np.linalg.inv(g)


# -- so(3) closed forms ------------------------------------------------------

def _so3_exp(w):
    """Rodrigues formula, batched over leading dimensions of (..., 3)."""
    w = np.asarray(w, dtype=float)
    theta2 = np.einsum("...i,...i->...", w, w)
    theta = np.sqrt(theta2)
    small = theta < 1e-4
    # sin(t)/t and (1-cos t)/t^2 with series fallbacks near zero
    with np.errstate(invalid="ignore", divide="ignore"):
        a = np.where(small, 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0,
                     np.sin(theta) / np.where(small, 1.0, theta))
        b = np.where(small, 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
                     (1.0 - np.cos(theta)) / np.where(small, 1.0, theta2))
    K = np.zeros(w.shape[:-1] + (3, 3))
    K[..., 0, 1] = -w[..., 2]
    K[..., 0, 2] = w[..., 1]
    K[..., 1, 0] = w[..., 2]
    K[..., 1, 2] = -w[..., 0]
    K[..., 2, 0] = -w[..., 1]
    K[..., 2, 1] = w[..., 0]
    eye = np.broadcast_to(np.eye(3), K.shape)
    return eye + a[..., None, None] * K + b[..., None, None] * np.matmul(K, K)


def _so3_log_single(R, max_angle):
    """Rotation vector of one rotation matrix via quaternion extraction.

    Stable over the whole angle range including near pi (where the
    skew part alone cancels); branch on the largest quaternion entry.
    """
    t = R[0, 0] + R[1, 1] + R[2, 2]
    if t > 0.0:
        s = sqrt(t + 1.0) * 2.0
        qw = 0.25 * s
        qv = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) / s
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = sqrt(max(1.0 + R[0, 0] - R[1, 1] - R[2, 2], 0.0)) * 2.0
        qw = (R[2, 1] - R[1, 2]) / s
        qv = np.array([0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s])
    elif R[1, 1] >= R[2, 2]:
        s = sqrt(max(1.0 + R[1, 1] - R[0, 0] - R[2, 2], 0.0)) * 2.0
        qw = (R[0, 2] - R[2, 0]) / s
        qv = np.array([(R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s])
    else:
        s = sqrt(max(1.0 + R[2, 2] - R[0, 0] - R[1, 1], 0.0)) * 2.0
        qw = (R[1, 0] - R[0, 1]) / s
        qv = np.array([(R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s])
    if qw < 0.0:
        qw, qv = -qw, -qv
    vn = float(np.linalg.norm(qv))
    angle = 2.0 * atan2(vn, qw)
    if angle >= max_angle:
        raise AngleOutOfRange(
            f"rotation angle {angle:.6f} >= {max_angle:.6f}; log is ill conditioned here"
        )
    if vn < 1e-12:
        return (2.0 / qw) * qv
    return (angle / vn) * qv


# -- generic matrix exponential ----------------------------------------------

def _exp_series(A, rtol=1e-13, max_terms=60):
    """Scaling and squaring on the exponential series, batched."""
    A = np.asarray(A, dtype=float)
    nrm = float(np.max(np.sqrt(np.einsum("...ij,...ij->...", A, A)))) if A.size else 0.0
    s = max(0, int(np.ceil(np.log2(nrm / 0.5))) if nrm > 0.5 else 0)
    B = A / (2.0 ** s)
    out = np.broadcast_to(np.eye(A.shape[-1]), A.shape).copy() + B
    term = B
    for k in range(2, max_terms + 1):
        term = np.matmul(term, B) / k
        out = out + term
        if np.max(np.abs(term)) <= rtol * max(np.max(np.abs(out)), 1.0):
            break
    for _ in range(s):
        out = np.matmul(out, out)
    return out


def exp_map(gm, y, t=1.0) -> np.ndarray:
    """exp(t * hat(y)), batched over leading dimensions of y."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1:] != (gm.algebra.n,):
        raise DimensionMismatch(f"expected {gm.algebra.n} components, got shape {y.shape}")
    w = t * y
    if gm.kind == "so3":
        return _so3_exp(w)
    if gm.kind == "abelian":
        # generators are nilpotent of order 2, the series terminates
        out = np.broadcast_to(np.eye(gm.rep_dim), w.shape[:-1] + (gm.rep_dim,) * 2).copy()
        out[..., : gm.algebra.n, gm.algebra.n] = w
        return out
    return _exp_series(hat(gm, w))


def log_map(gm, g, max_angle=SO3_MAX_LOG_ANGLE) -> np.ndarray:
    """Smallest-magnitude algebra coordinates with exp_map(log_map(g)) = g.

    Raises AngleOutOfRange outside the injectivity radius (for so3 the
    default cutoff is pi - 1e-6; pass a larger ``max_angle`` to relax).
    """
    g = np.asarray(g, dtype=float)
    d = gm.rep_dim
    if g.shape[-2:] != (d, d):
        raise DimensionMismatch(f"expected {(d, d)} matrices, got shape {g.shape}")
    if gm.kind == "abelian":
        return g[..., : gm.algebra.n, gm.algebra.n].copy()
    lead = g.shape[:-2]
    flat_g = g.reshape((-1, d, d))
    out = np.empty((flat_g.shape[0], gm.algebra.n))
    for b in range(flat_g.shape[0]):
        if gm.kind == "so3":
            out[b] = _so3_log_single(flat_g[b], max_angle)
        else:
            L = scipy.linalg.logm(flat_g[b])
            if np.abs(L.imag).max() > 1e-9:
                raise AngleOutOfRange("matrix logarithm left the real algebra")
            coords = unhat(gm, L.real)
            back = exp_map(gm, coords)
            if np.abs(back - flat_g[b]).max() > 1e-9 * (1.0 + np.abs(flat_g[b]).max()):
                raise AngleOutOfRange("logarithm round trip failed; element outside chart")
            out[b] = coords
    return out.reshape(lead + (gm.algebra.n,))


# -- Munthe-Kaas integration --------------------------------------------------

def dexpinv(model, omega, v) -> np.ndarray:
    """Inverse differential of exp truncated for order 4:
    v + [omega, v]/2 + [omega, [omega, v]]/12."""
    c1 = bracket(model, omega, v)
    return v + 0.5 * c1 + bracket(model, omega, c1) / 12.0


def rkmk_coupled_step(gm, x, v, t, h, rhs, needs_x=False):
    """One fourth order Munthe-Kaas step for (x in G, v in R^p).

    ``rhs(t, x, v) -> (z, vdot)`` returns the body velocity ``z`` of the
    group part and the plain derivative of the vector part; all arrays
    broadcast over leading batch dimensions.  When ``needs_x`` is false
    the stage group elements are not formed (rhs must then ignore x).
    """
    model = gm.algebra

    def stage_x(theta):
        if not needs_x:
            return x
        return compose(x, exp_map(gm, theta))

    z1, f1 = rhs(t, x, v)
    th = 0.5 * h * z1
    z2, f2 = rhs(t + 0.5 * h, stage_x(th), v + 0.5 * h * f1)
    k2 = dexpinv(model, th, z2)
    th = 0.5 * h * k2
    z3, f3 = rhs(t + 0.5 * h, stage_x(th), v + 0.5 * h * f2)
    k3 = dexpinv(model, th, z3)
    th = h * k3
    z4, f4 = rhs(t + h, stage_x(th), v + h * f3)
    k4 = dexpinv(model, th, z4)

    omega = (h / 6.0) * (z1 + 2.0 * k2 + 2.0 * k3 + k4)
    x_next = compose(x, exp_map(gm, omega))
    v_next = v + (h / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
    return x_next, v_next


def reconstruct_step(gm, x, y_of_t, t, h) -> np.ndarray:
    """Advance x by one step of the group integrator for a known y(t)."""
    if h <= 0:
        raise ValueError("step size must be positive")
    empty = np.zeros(0)

    def rhs(s, _x, _v):
        return np.asarray(y_of_t(s), dtype=float), empty

    x_next, _ = rkmk_coupled_step(gm, np.asarray(x, dtype=float), empty, t, h, rhs)
    return x_next


def rk4_project_step(gm, x, y_of_t, t, h) -> np.ndarray:
    """Classical RK4 on raw matrix entries, then projection to the manifold.

    Baseline for accuracy comparisons only; the drivers always use the
    Munthe-Kaas step.  Projection takes the polar factor for so3 and is
    a no-op otherwise (abelian integrates exactly, generic has no
    canonical projection).
    """
    def f(s, X):
        return X @ hat(gm, np.asarray(y_of_t(s), dtype=float))

    x = np.asarray(x, dtype=float)
    k1 = f(t, x)
    k2 = f(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = f(t + h, x + h * k3)
    out = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if gm.kind == "so3":
        u, _, vt = np.linalg.svd(out)
        out = u @ vt
        if np.linalg.det(out) < 0:
            u[:, -1] *= -1.0
            out = u @ vt
    return out


def orthogonality_defect(g) -> float:
    """Frobenius norm of g^T g - I (group-manifold drift measure for so3)."""
    g = np.asarray(g, dtype=float)
    d = g.shape[-1]
    return float(np.linalg.norm(np.matmul(np.swapaxes(g, -1, -2), g) - np.eye(d)))


def adjoint_matrix(gm, g) -> np.ndarray:
    """Matrix of Ad_g in the model basis: columns are unhat(g E_j g^{-1})."""
    ginv = inverse(gm, g)
    conj = np.einsum("ab,nbc,cd->nad", np.asarray(g, dtype=float), gm.basis, ginv)
    return unhat(gm, conj).T


def validate_group(gm, tol=1e-12):
    """Check commutator consistency of the representation (reports, no throw)."""
    from .algebra import CheckResult, ValidationReport  # local to avoid cycle noise

    n = gm.algebra.n
    comm = np.einsum("iab,jbc->ijac", gm.basis, gm.basis)
    comm = comm - np.transpose(comm, (1, 0, 2, 3))
    expected = np.einsum("kij,kab->ijab", gm.algebra.C, gm.basis)
    res = float(np.abs(comm - expected).max())
    checks = [CheckResult("commutator_consistency", res < tol, res)]
    if gm.kind == "so3":
        res = float(np.abs(gm.basis + np.transpose(gm.basis, (0, 2, 1))).max())
        checks.append(CheckResult("so3_skew_generators", res < tol, res))
    return ValidationReport(tuple(checks))
