"""Lie algebra arithmetic from structure constants.

Vectors and covectors are plain numpy arrays of length ``n`` holding
components in the model basis and its dual; every operation broadcasts
over leading batch dimensions.  Models are frozen dataclasses treated as
immutable after construction, so all functions here are pure and safe
for concurrent use.

Coadjoint convention: ``<ad_star(y, mu), z> = <mu, bracket(y, z)>`` with
no sign flip.  On so(3) with the cross-product bracket this makes
``ad_star(y, mu) = mu x y``, which is the convention the rest of the
library (extremal flows included) relies on.

The basis must be adapted to the actuated subspace: the first ``m``
basis vectors span it, the remaining ``n - m`` span its inertia
orthogonal complement, and the inertia matrix is block diagonal across
that split.  ``validate_model`` checks this along with antisymmetry,
the Jacobi identity and positive definiteness.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import DimensionMismatch

DEFAULT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class LieAlgebraModel:
    """Structure constants, inertia and actuation split of a Lie algebra.

    ``C[k, i, j]`` is the coefficient of the k-th basis vector in the
    bracket of basis vectors i and j.  ``inertia_inv`` is precomputed
    once from a Cholesky factorization at construction.
    """

    n: int
    m: int
    C: np.ndarray
    inertia: np.ndarray
    inertia_inv: np.ndarray
    name: str = "custom"


def make_model(n, m, C, inertia, name="custom", strict=True) -> LieAlgebraModel:
    """Build a model from raw arrays, checking shapes and (optionally) invariants.

    With ``strict`` the full invariant suite runs and a failure raises
    ``ValueError``; pass ``strict=False`` to construct deliberately broken
    models for validation reporting.
    """
    n = int(n)
    m = int(m)
    if n < 1:
        raise ValueError(f"algebra dimension must be positive, got {n}")
    if not 1 <= m <= n:
        raise ValueError(f"actuated dimension m={m} must satisfy 1 <= m <= n={n}")
    C = np.asarray(C, dtype=float)
    inertia = np.asarray(inertia, dtype=float)
    if C.shape != (n, n, n):
        raise DimensionMismatch(f"structure constants must have shape {(n, n, n)}, got {C.shape}")
    if inertia.shape != (n, n):
        raise DimensionMismatch(f"inertia must have shape {(n, n)}, got {inertia.shape}")
    if not (np.isfinite(C).all() and np.isfinite(inertia).all()):
        raise ValueError("model arrays must be finite")

    sym = 0.5 * (inertia + inertia.T)
    try:
        factor = cho_factor(sym)
        inv = cho_solve(factor, np.eye(n))
    except np.linalg.LinAlgError:
        if strict:
            raise ValueError("inertia is not positive definite")
        inv = np.full((n, n), np.nan)

    model = LieAlgebraModel(n=n, m=m, C=C.copy(), inertia=inertia.copy(),
                            inertia_inv=inv, name=name)
    if strict:
        report = validate_model(model)
        if not report.passed:
            raise ValueError("model invariants violated: " + ", ".join(report.failures()))
    return model


def so3_model(inertia_diag=(1.0, 1.0, 1.0), m=3) -> LieAlgebraModel:
    """so(3) with the cross-product bracket and diagonal inertia."""
    eps = np.zeros((3, 3, 3))
    eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1.0
    eps[0, 2, 1] = eps[2, 1, 0] = eps[1, 0, 2] = -1.0
    # C[k, i, j] = eps_{ijk}
    C = np.transpose(eps, (2, 0, 1))
    diag = np.asarray(inertia_diag, dtype=float)
    if diag.shape != (3,) or np.any(diag <= 0):
        raise ValueError("inertia_diag must be three positive numbers")
    return make_model(3, m, C, np.diag(diag), name="so3")


def abelian_model(n, m=None, inertia=None) -> LieAlgebraModel:
    """Abelian R^n (all structure constants zero)."""
    n = int(n)
    m = n if m is None else int(m)
    inertia = np.eye(n) if inertia is None else np.asarray(inertia, dtype=float)
    if inertia.ndim == 1:
        inertia = np.diag(inertia)
    return make_model(n, m, np.zeros((n, n, n)), inertia, name="abelian")


def load_model(path):
    """Load a custom model file.

    JSON schema: ``n``, ``m``, ``structure_constants`` as a list of
    ``[k, i, j, value]`` with 1-based indices (list every nonzero entry,
    including the antisymmetric partner), ``inertia`` as an n x n array.
    An optional matrix representation may be attached via ``rep_dim`` and
    ``basis_matrices`` (n matrices, row-major nested lists); it is
    returned as a separate dict for the group layer to consume.

    Returns ``(model, rep)`` where ``rep`` is ``None`` or a dict with
    keys ``rep_dim`` and ``basis_matrices``.  Invariants are NOT enforced
    here so that validation can report on broken files; run
    ``validate_model`` on the result.
    """
    data = json.loads(Path(path).read_text())
    known = {"n", "m", "structure_constants", "inertia", "rep_dim", "basis_matrices", "name"}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown keys in model file: {sorted(unknown)}")
    for key in ("n", "m", "inertia"):
        if key not in data:
            raise ValueError(f"model file missing required key '{key}'")
    n = int(data["n"])
    C = np.zeros((n, n, n))
    for entry in data.get("structure_constants", []):
        if len(entry) != 4:
            raise ValueError(f"structure constant entries are (k, i, j, value), got {entry}")
        k, i, j, value = entry
        if not (1 <= k <= n and 1 <= i <= n and 1 <= j <= n):
            raise ValueError(f"structure constant index out of range in {entry}")
        C[int(k) - 1, int(i) - 1, int(j) - 1] = float(value)
    model = make_model(n, data["m"], C, data["inertia"],
                       name=str(data.get("name", "custom")), strict=False)
    rep = None
    if "basis_matrices" in data or "rep_dim" in data:
        if not ("basis_matrices" in data and "rep_dim" in data):
            raise ValueError("rep_dim and basis_matrices must be given together")
        basis = np.asarray(data["basis_matrices"], dtype=float)
        d = int(data["rep_dim"])
        if basis.shape != (n, d, d):
            raise DimensionMismatch(f"basis_matrices must have shape {(n, d, d)}, got {basis.shape}")
        rep = {"rep_dim": d, "basis_matrices": basis}
    return model, rep


def _check_dim(model, v, what):
    v = np.asarray(v, dtype=float)
    if v.shape[-1:] != (model.n,):
        raise DimensionMismatch(f"{what} must have {model.n} components, got shape {v.shape}")
    return v


def bracket(model, y, z) -> np.ndarray:
    """Lie bracket [y, z] in coordinates."""
    y = _check_dim(model, y, "y")
    z = _check_dim(model, z, "z")
    return np.einsum("kij,...i,...j->...k", model.C, y, z)


def ad_star(model, y, mu) -> np.ndarray:
    """Coadjoint action: <ad_star(y, mu), z> = <mu, [y, z]> for all z."""
    y = _check_dim(model, y, "y")
    mu = _check_dim(model, mu, "mu")
    return np.einsum("kij,...i,...k->...j", model.C, y, mu)


def flat(model, y) -> np.ndarray:
    """Lower an algebra vector with the inertia: y -> inertia @ y."""
    y = _check_dim(model, y, "y")
    return np.einsum("ij,...j->...i", model.inertia, y)


def sharp(model, xi) -> np.ndarray:
    """Raise a covector with the inertia inverse (factorized once per model)."""
    xi = _check_dim(model, xi, "xi")
    return np.einsum("ij,...j->...i", model.inertia_inv, xi)


def connection_bilinear(model, y, z) -> np.ndarray:
    """Bilinear map of the left-invariant metric connection.

    Torsion-free (antisymmetrization is the bracket) and metric
    compatible for constant sections.
    """
    return 0.5 * bracket(model, y, z) - 0.5 * sharp(
        model, ad_star(model, y, flat(model, z)) + ad_star(model, z, flat(model, y))
    )


def bias(model, y) -> np.ndarray:
    """Drift of the velocity equation: sharp(ad_star(y, flat(y))).

    Equals minus connection_bilinear(y, y); on so(3) it is
    inertia^{-1}((inertia y) x y), the free rigid body term.
    """
    return sharp(model, ad_star(model, y, flat(model, y)))


def restrict_covector(model, xi) -> np.ndarray:
    """Zero the components of a covector outside the actuated subspace."""
    xi = _check_dim(model, xi, "xi")
    out = np.zeros_like(xi)
    out[..., : model.m] = xi[..., : model.m]
    return out


def embed_control(model, u) -> np.ndarray:
    """Pad an m-vector of controls with n - m zeros."""
    u = np.asarray(u, dtype=float)
    if u.shape[-1:] != (model.m,):
        raise DimensionMismatch(f"control must have {model.m} components, got shape {u.shape}")
    out = np.zeros(u.shape[:-1] + (model.n,))
    out[..., : model.m] = u
    return out


def kinetic_energy(model, y) -> np.ndarray:
    """Half the inertia quadratic form of a body velocity."""
    y = _check_dim(model, y, "y")
    return 0.5 * np.einsum("...i,...i->...", y, flat(model, y))


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def max_residual(self) -> float:
        return max(c.residual for c in self.checks)

    def failures(self):
        return [c.name for c in self.checks if not c.passed]

    def lines(self):
        return [
            f"{'PASS' if c.passed else 'FAIL'}  {c.name:<24} residual={c.residual:.3e}"
            for c in self.checks
        ]


def validate_model(model, tol=DEFAULT_TOL) -> ValidationReport:
    """Check all model invariants; reports rather than throws."""
    C, inertia = model.C, model.inertia
    checks = []

    res = float(np.abs(C + np.transpose(C, (0, 2, 1))).max())
    checks.append(CheckResult("antisymmetry", res < tol, res))

    jac = (
        np.einsum("lij,plk->pijk", C, C)
        + np.einsum("ljk,pli->pijk", C, C)
        + np.einsum("lki,plj->pijk", C, C)
    )
    res = float(np.abs(jac).max())
    checks.append(CheckResult("jacobi_identity", res < tol, res))

    res = float(np.abs(inertia - inertia.T).max())
    checks.append(CheckResult("inertia_symmetric", res < tol, res))

    eigs = np.linalg.eigvalsh(0.5 * (inertia + inertia.T))
    lam_min = float(eigs.min())
    checks.append(CheckResult("inertia_positive", lam_min > 0.0, max(0.0, -lam_min)))

    if model.m < model.n:
        res = float(np.abs(inertia[: model.m, model.m:]).max())
    else:
        res = 0.0
    checks.append(CheckResult("adapted_basis", res < tol, res))

    return ValidationReport(tuple(checks))
