"""Lie algebras, left-invariant metrics, and their curvature.

A homogeneous geometry is encoded by structure constants c[k,i,j] with
[e_i, e_j] = sum_k c[k,i,j] e_k in a fixed frame, plus a symmetric
positive-definite matrix g giving the inner product on the algebra. All
curvature quantities are finite-dimensional algebra computations: the
Koszul formula gives the connection, tracing the curvature operator gives
the Ricci form, and every derived scalar follows from g^{-1} Ric.

Norm convention: |T|^2_g = trace((g^{-1} T)^2) for a symmetric bilinear
form T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import backend
from .errors import GeometryError, NonSPDMetricError, UnknownPresetError

ALGEBRA_TOL = 1e-9  # identity residual above this is a violation


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class StructureConstants:
    """Bracket tensor of a Lie algebra in a fixed frame."""

    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.ndim != 3 or len(set(c.shape)) != 1:
            raise GeometryError(f"structure constants must be (n,n,n), got {c.shape}")
        object.__setattr__(self, "c", _readonly(c))

    @property
    def dim(self) -> int:
        return self.c.shape[0]


@dataclass(frozen=True)
class LeftInvariantMetric:
    """Symmetric positive-definite inner product on the algebra."""

    g: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise GeometryError(f"metric must be square, got {g.shape}")
        if not np.array_equal(g, g.T):
            raise GeometryError("metric matrix must be symmetric exactly as stored")
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            raise NonSPDMetricError("metric is not positive definite") from None
        object.__setattr__(self, "g", _readonly(g))

    @property
    def dim(self) -> int:
        return self.g.shape[0]


@dataclass(frozen=True)
class CurvatureData:
    """Ricci form and derived scalars of a pair (c, g).

    ricci pairs against g (scale-invariant as a bilinear form), scalar is
    R = tr(g^{-1} ricci), einstein_dev = |Ric - (R/n) g|^2_g vanishes
    exactly on Einstein metrics, ric2 = |Ric|^2_g, and ricci_eigs are the
    sorted eigenvalues of g^{-1} ricci.
    """

    ricci: np.ndarray
    scalar: float
    einstein_dev: float
    ric2: float
    ricci_eigs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "ricci", _readonly(self.ricci))
        object.__setattr__(self, "ricci_eigs", _readonly(self.ricci_eigs))


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of the algebra identity checks on structure constants."""

    antisymmetry_residual: float
    jacobi_residual: float
    worst_jacobi_quadruple: tuple
    unimodularity_residual: float
    unimodular: bool
    errors: tuple
    warnings: tuple

    @property
    def is_valid(self) -> bool:
        return not self.errors

    def to_dict(self) -> dict:
        return {
            "valid": self.is_valid,
            "unimodular": self.unimodular,
            "antisymmetry_residual": self.antisymmetry_residual,
            "jacobi_residual": self.jacobi_residual,
            "worst_jacobi_quadruple": list(self.worst_jacobi_quadruple),
            "unimodularity_residual": self.unimodularity_residual,
            "errors": list(self.errors),
            "warnings": list(self.warnings),
        }


def jacobi_residual_tensor(c: np.ndarray) -> np.ndarray:
    """J[l,i,j,k] = sum_m (c[m,i,j]c[l,m,k] + c[m,j,k]c[l,m,i] + c[m,k,i]c[l,m,j])."""
    t = np.einsum("mij,lmk->lijk", c, c)
    return t + np.einsum("lijk->ljki", t) + np.einsum("lijk->lkij", t)


def validate(sc: StructureConstants, tol: float = ALGEBRA_TOL) -> ValidationReport:
    """Check antisymmetry, the Jacobi identity, and unimodularity.

    Antisymmetry and Jacobi failures are errors; a nonzero bracket trace
    (non-unimodular algebra, no compact quotients) is only a warning.
    """
    c = sc.c
    errors = []
    warnings = []

    anti = float(np.max(np.abs(c + np.swapaxes(c, 1, 2)))) if c.size else 0.0
    if anti > tol:
        errors.append(f"antisymmetry violated: max |c[k,i,j] + c[k,j,i]| = {anti:.3e}")

    J = jacobi_residual_tensor(c)
    jac = float(np.max(np.abs(J))) if J.size else 0.0
    worst = tuple(int(x) for x in np.unravel_index(np.argmax(np.abs(J)), J.shape))
    # report as (i, j, k, l) matching the identity's free indices
    worst_quad = (worst[1], worst[2], worst[3], worst[0])
    if jac > tol:
        errors.append(
            f"Jacobi identity violated: residual {jac:.3e} at (i,j,k,l)={worst_quad}"
        )

    uni = float(np.max(np.abs(np.einsum("iij->j", c)))) if c.size else 0.0
    if uni > tol:
        warnings.append(
            f"non-unimodular: max_j |sum_i c[i,i,j]| = {uni:.3e}; "
            "no compact quotients exist for this algebra"
        )

    return ValidationReport(
        antisymmetry_residual=anti,
        jacobi_residual=jac,
        worst_jacobi_quadruple=worst_quad,
        unimodularity_residual=uni,
        unimodular=uni <= tol,
        errors=tuple(errors),
        warnings=tuple(warnings),
    )


def levi_civita(sc: StructureConstants, metric: LeftInvariantMetric) -> np.ndarray:
    """Connection coefficients gamma[k,i,j], nabla_{e_i} e_j = gamma[k,i,j] e_k.

    Koszul formula for left-invariant fields:
    <nabla_{e_i} e_j, e_k> = 1/2 (<[e_i,e_j],e_k> - <[e_j,e_k],e_i> + <[e_k,e_i],e_j>).
    """
    return backend.connection(sc.c, metric.g)


def curvature(sc: StructureConstants, metric: LeftInvariantMetric) -> CurvatureData:
    """Ricci form and all derived scalars of (c, g)."""
    return curvature_from_arrays(sc.c, metric.g)


def curvature_from_arrays(c: np.ndarray, g: np.ndarray) -> CurvatureData:
    """Same as :func:`curvature` on bare arrays (flow-engine fast path)."""
    ric, B, R, ric2, dev = backend.curvature_core(c, g)
    eigs = np.sort(np.linalg.eigvalsh(B))
    return CurvatureData(ricci=ric, scalar=R, einstein_dev=dev, ric2=ric2, ricci_eigs=eigs)


def milnor_ricci(lams: Iterable[float]) -> tuple:
    """Principal Ricci curvatures of a 3D unimodular Milnor frame.

    For an orthonormal frame with [e_2,e_3] = l1 e_1 (cyclic) the Ricci
    form is diagonal with r_i = 2 mu_j mu_k, mu_i = (l1+l2+l3)/2 - l_i.
    Serves as the independent oracle against the Koszul pipeline.
    """
    l1, l2, l3 = (float(x) for x in lams)
    half = 0.5 * (l1 + l2 + l3)
    mu = (half - l1, half - l2, half - l3)
    return (2.0 * mu[1] * mu[2], 2.0 * mu[0] * mu[2], 2.0 * mu[0] * mu[1])


def milnor_bracket(l1: float, l2: float, l3: float) -> StructureConstants:
    """Structure constants with [e_2,e_3] = l1 e_1, [e_3,e_1] = l2 e_2, [e_1,e_2] = l3 e_3."""
    c = np.zeros((3, 3, 3))
    c[0, 1, 2], c[0, 2, 1] = l1, -l1
    c[1, 2, 0], c[1, 0, 2] = l2, -l2
    c[2, 0, 1], c[2, 1, 0] = l3, -l3
    return StructureConstants(c)


@dataclass(frozen=True)
class Preset:
    name: str
    sc: StructureConstants
    metric: LeftInvariantMetric
    volume0: float = 1.0
    params: dict = field(default_factory=dict)


PRESET_NAMES = ("abelian3", "su2_round", "su2_berger", "heisenberg", "sol", "sl2r_diag", "custom")


def preset(name: str, **params) -> Preset:
    """Catalog of reference geometries, each with a default initial metric.

    su2_berger takes metric parameters A, B, C (default 2, 1, 1); custom
    takes explicit arrays c, g (and optionally volume0).
    """
    eye = LeftInvariantMetric(np.eye(3))
    if name == "abelian3":
        return Preset(name, StructureConstants(np.zeros((3, 3, 3))), eye)
    if name == "su2_round":
        # Milnor lambdas (2,2,2): the unit round 3-sphere, Ric = 2g, R = 6
        return Preset(name, milnor_bracket(2.0, 2.0, 2.0), eye)
    if name == "su2_berger":
        A = float(params.pop("A", 2.0))
        B = float(params.pop("B", 1.0))
        C = float(params.pop("C", 1.0))
        _reject_extra(name, params)
        return Preset(
            name,
            milnor_bracket(2.0, 2.0, 2.0),
            LeftInvariantMetric(np.diag([A, B, C])),
            params={"A": A, "B": B, "C": C},
        )
    if name == "heisenberg":
        return Preset(name, milnor_bracket(1.0, 0.0, 0.0), eye)
    if name == "sol":
        return Preset(name, milnor_bracket(1.0, -1.0, 0.0), eye)
    if name == "sl2r_diag":
        return Preset(name, milnor_bracket(1.0, 1.0, -1.0), eye)
    if name == "custom":
        if "c" not in params or "g" not in params:
            raise UnknownPresetError(
                "preset 'custom' needs explicit arrays c and g "
                "(or pass an inline geometry document to the CLI)"
            )
        sc = StructureConstants(np.asarray(params["c"], dtype=float))
        metric = LeftInvariantMetric(np.asarray(params["g"], dtype=float))
        v0 = float(params.get("volume0", 1.0))
        return Preset(name, sc, metric, volume0=v0)
    raise UnknownPresetError(f"unknown preset {name!r}; catalog: {', '.join(PRESET_NAMES)}")


def _reject_extra(name: str, params: dict) -> None:
    if params:
        raise UnknownPresetError(f"preset {name!r} got unknown parameters {sorted(params)}")


def parse_preset_spec(spec: str) -> Preset:
    """Parse CLI-style preset identifiers like 'su2_berger(2,1,1)'."""
    spec = spec.strip()
    if "(" in spec:
        if not spec.endswith(")"):
            raise UnknownPresetError(f"malformed preset spec {spec!r}")
        name, args = spec[:-1].split("(", 1)
        values = [float(v) for v in args.split(",")] if args.strip() else []
        if name.strip() == "su2_berger":
            if len(values) != 3:
                raise UnknownPresetError("su2_berger takes exactly three parameters (A,B,C)")
            return preset("su2_berger", A=values[0], B=values[1], C=values[2])
        raise UnknownPresetError(f"preset {name.strip()!r} does not take parameters")
    return preset(spec)


def transform_frame(sc: StructureConstants, P: np.ndarray) -> StructureConstants:
    """Pushforward of the bracket under the frame change e'_i = sum_a P[a,i] e_a."""
    Pinv = np.linalg.inv(P)
    c2 = np.einsum("km,mab,ai,bj->kij", Pinv, sc.c, P, P)
    return StructureConstants(c2)


def geometry_to_dict(sc: StructureConstants, metric: LeftInvariantMetric,
                     volume0: float = 1.0) -> dict:
    """Wire format: 1-based bracket entries with i<j, antisymmetry implied."""
    n = sc.dim
    brackets = []
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(n):
                v = sc.c[k, i, j]
                if v != 0.0:
                    brackets.append({"i": i + 1, "j": j + 1, "k": k + 1, "value": float(v)})
    return {
        "dim": n,
        "brackets": brackets,
        "metric": [[float(x) for x in row] for row in metric.g],
        "volume0": float(volume0),
    }


def geometry_from_dict(doc: dict) -> tuple:
    """Inverse of :func:`geometry_to_dict`; returns (sc, metric, volume0)."""
    try:
        n = int(doc["dim"])
    except (KeyError, TypeError):
        raise GeometryError("geometry document needs an integer 'dim'") from None
    if n < 1:
        raise GeometryError(f"dim must be >= 1, got {n}")
    c = np.zeros((n, n, n))
    for entry in doc.get("brackets", []):
        i, j, k = int(entry["i"]) - 1, int(entry["j"]) - 1, int(entry["k"]) - 1
        v = float(entry["value"])
        if not (0 <= i < n and 0 <= j < n and 0 <= k < n):
            raise GeometryError(f"bracket entry {entry} out of range for dim {n}")
        if i >= j:
            raise GeometryError(f"bracket entries must have i < j, got {entry}")
        c[k, i, j] = v
        c[k, j, i] = -v
    metric = doc.get("metric")
    if metric is None:
        g = np.eye(n)
    else:
        g = np.asarray(metric, dtype=float)
        if g.ndim == 1 and g.size == n * n:
            g = g.reshape(n, n)
    volume0 = float(doc.get("volume0", 1.0))
    if volume0 <= 0:
        raise GeometryError(f"volume0 must be positive, got {volume0}")
    return StructureConstants(c), LeftInvariantMetric(g), volume0


def milnor_frame_lambdas(sc: StructureConstants, g_diag: np.ndarray) -> tuple:
    """Rescaled Milnor lambdas of a diagonal metric on a Milnor-form bracket.

    Orthonormalizing f_i = e_i / sqrt(g_ii) turns [f_2,f_3] = l1' f_1 with
    l1' = l1 sqrt(g_11 / (g_22 g_33)) and cyclic. Test-harness helper for
    the Milnor oracle.
    """
    d = np.asarray(g_diag, dtype=float)
    l1 = sc.c[0, 1, 2]
    l2 = sc.c[1, 2, 0]
    l3 = sc.c[2, 0, 1]
    return (
        l1 * math.sqrt(d[0] / (d[1] * d[2])),
        l2 * math.sqrt(d[1] / (d[2] * d[0])),
        l3 * math.sqrt(d[2] / (d[0] * d[1])),
    )
