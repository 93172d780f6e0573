"""Monotone-quantity monitors along homogeneous flow trajectories.

Two exact identities drive everything here. Along the normalized flow the
scalar curvature satisfies dR/dt = 2 |Ric - (R/n) g|^2_g, so R increases
strictly unless the metric is Einstein. Along the unnormalized flow the
scale-invariant combination R V^{2/n} obeys the same law with an extra
factor V^{2/n}. The monitors compare centered finite differences of the
integrated samples against these closed forms, and assert monotonicity
with a tolerance tied to the integrator's error control (observed
violations must be attributable to integration error, and must shrink
under refinement).

On homogeneous metrics the spatial minimum of R is R itself, and the
least eigenvalue of -4*Laplacian + R is attained by constants, so the
Perelman-style monitor lambda_1 V^{2/n} coincides with R V^{2/n}; the
sample type carries both, computed through one arithmetic path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FlowKindError, TooFewSamplesError

EINSTEIN_DEV_TOL = 1e-8  # einstein_dev above this marks a non-Einstein sample
STRICT_WINDOW = 10  # monotonicity window width, in accepted steps


def scale_invariant_R(R: float, V: float, n: int) -> float:
    """R V^{2/n}; the single arithmetic path shared by every monitor."""
    return R * V ** (2.0 / n)


@dataclass(frozen=True)
class MonitorSample:
    """Scalar monitors attached to one trajectory sample."""

    t: float
    R: float
    RV2n: float
    einstein_dev: float
    ric2: float
    perelman_lambda: float
    V: float

    @classmethod
    def from_curvature(cls, t: float, V: float, curv, n: int) -> "MonitorSample":
        R = curv.scalar
        return cls(
            t=t,
            R=R,
            RV2n=scale_invariant_R(R, V, n),
            einstein_dev=curv.einstein_dev,
            ric2=curv.ric2,
            perelman_lambda=R,
            V=V,
        )

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "R": self.R,
            "RV2n": self.RV2n,
            "einstein_dev": self.einstein_dev,
            "ric2": self.ric2,
            "perelman_lambda": self.perelman_lambda,
            "V": self.V,
        }


def centered_derivative(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Second-order centered derivative at interior points of a 1D grid.

    Handles non-uniform spacing; reduces to (y[i+1]-y[i-1])/(2h) on a
    uniform grid. No smoothing, so the O(step^2) residual signature of
    the lemma checks stays clean.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    h1 = t[1:-1] - t[:-2]
    h2 = t[2:] - t[1:-1]
    return (
        h1 / (h2 * (h1 + h2)) * y[2:]
        + (h2 - h1) / (h1 * h2) * y[1:-1]
        - h2 / (h1 * (h1 + h2)) * y[:-2]
    )


@dataclass(frozen=True)
class ResidualReport:
    """Finite-difference vs closed-form comparison along a trajectory."""

    check: str
    max_rel_residual: float
    at_t: float
    n_interior: int
    mean_step: float
    tol: float
    residuals: np.ndarray

    @property
    def passed(self) -> bool:
        return self.max_rel_residual < self.tol

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "max_rel_residual": self.max_rel_residual,
            "at_t": self.at_t,
            "n_interior": self.n_interior,
            "mean_step": self.mean_step,
            "tol": self.tol,
            "passed": self.passed,
        }


def _residual_report(name, t, fd, closed, tol):
    rel = np.abs(fd - closed) / np.maximum(np.abs(fd), 1e-12)
    worst = int(np.argmax(rel))
    return ResidualReport(
        check=name,
        max_rel_residual=float(rel[worst]),
        at_t=float(t[1:-1][worst]),
        n_interior=len(rel),
        mean_step=float(np.mean(np.diff(t))),
        tol=tol,
        residuals=rel,
    )


def lemma1_check(traj, tol: float = 1e-5) -> ResidualReport:
    """Audit dR/dt = 2 |Ric - (R/n) g|^2_g along a normalized trajectory.

    Compares the centered finite difference of R against twice the
    Einstein deviation at every interior sample; the residual is O(step^2).
    """
    if traj.kind != "normalized":
        raise FlowKindError("lemma1_check applies to normalized-flow trajectories only")
    if len(traj.samples) < 5:
        raise TooFewSamplesError("lemma1_check needs at least 5 samples")
    t = traj.times
    R = np.array([s.monitor.R for s in traj.samples])
    dev = np.array([s.monitor.einstein_dev for s in traj.samples])
    fd = centered_derivative(t, R)
    return _residual_report("lemma1_identity", t, fd, 2.0 * dev[1:-1], tol)


def lemma2_check(traj, tol: float = 1e-5) -> ResidualReport:
    """Audit d(R V^{2/n})/dt = 2 |Ric - (R/n) g|^2_g V^{2/n} (unnormalized flow)."""
    if traj.kind != "unnormalized":
        raise FlowKindError("lemma2_check applies to unnormalized-flow trajectories only")
    if len(traj.samples) < 5:
        raise TooFewSamplesError("lemma2_check needs at least 5 samples")
    n = traj.dim
    t = traj.times
    q = np.array([s.monitor.RV2n for s in traj.samples])
    dev = np.array([s.monitor.einstein_dev for s in traj.samples])
    V = np.array([s.monitor.V for s in traj.samples])
    fd = centered_derivative(t, q)
    closed = 2.0 * dev[1:-1] * V[1:-1] ** (2.0 / n)
    return _residual_report("lemma2_identity", t, fd, closed, tol)


@dataclass(frozen=True)
class MonotonicityVerdict:
    """Outcome of a monotonicity assertion over one trajectory."""

    quantity: str
    monotone: bool
    worst_violation: float
    tol: float
    strictness: str  # strictly-increasing | stationary | mixed
    einstein_consistent: bool

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "monotone": self.monotone,
            "worst_violation": self.worst_violation,
            "tol": self.tol,
            "strictness": self.strictness,
            "einstein_consistent": self.einstein_consistent,
        }


def monotone_assert(traj, quantity: str) -> MonotonicityVerdict:
    """Assert monotonicity of R (normalized flow) or RV2n (unnormalized).

    The comparison tolerance is 10x the integrator's relative tolerance
    scaled by the quantity, so violations beyond it cannot be blamed on
    integration error. Strictness is cross-checked against einstein_dev:
    stationary samples must be Einstein, non-Einstein stretches must show
    strict increase over every window of STRICT_WINDOW steps.
    """
    if quantity == "R_normalized":
        if traj.kind != "normalized":
            raise FlowKindError("R monotonicity is a normalized-flow statement")
        q = np.array([s.monitor.R for s in traj.samples])
        name = "R_normalized"
    elif quantity == "RV2n":
        if traj.kind != "unnormalized":
            raise FlowKindError("RV^{2/n} monotonicity is an unnormalized-flow statement")
        q = np.array([s.monitor.RV2n for s in traj.samples])
        name = "RV2n"
    else:
        raise ValueError(f"unknown quantity {quantity!r}; use 'R_normalized' or 'RV2n'")
    if len(q) < 2:
        raise TooFewSamplesError("monotonicity needs at least 2 samples")

    dev = np.array([s.monitor.einstein_dev for s in traj.samples])
    rel_tol = traj.config.rel_tol
    scale = np.maximum(np.abs(q[:-1]), np.abs(q[1:]))
    tol_steps = 10.0 * rel_tol * scale
    drops = q[:-1] - q[1:]
    worst = float(np.max(drops)) if len(drops) else 0.0
    monotone = bool(np.all(drops <= tol_steps))

    qscale = float(np.max(np.abs(q)))
    stat_tol = 10.0 * rel_tol * qscale + 1e-300
    stationary = float(np.max(q) - np.min(q)) <= stat_tol

    w = min(STRICT_WINDOW, len(q) - 1)
    starts = np.arange(len(q) - w)
    strict_windows = q[starts + w] > q[starts]
    if stationary:
        strictness = "stationary"
    elif bool(np.all(strict_windows)):
        strictness = "strictly-increasing"
    else:
        strictness = "mixed"

    consistent = True
    if stationary:
        consistent = bool(np.all(dev < EINSTEIN_DEV_TOL))
    else:
        for i in starts:
            if np.max(dev[i : i + w + 1]) > EINSTEIN_DEV_TOL and not strict_windows[i]:
                consistent = False
                break

    return MonotonicityVerdict(
        quantity=name,
        monotone=monotone,
        worst_violation=max(worst, 0.0),
        tol=float(np.max(tol_steps)) if len(drops) else 0.0,
        strictness=strictness,
        einstein_consistent=consistent,
    )


@dataclass(frozen=True)
class PreconditionReport:
    """Sign test of R at t=0 per the steady/expanding exclusion rule."""

    classification: str  # steady/expanding-excluded | possible
    margin: float

    def to_dict(self) -> dict:
        return {"classification": self.classification, "margin": self.margin}


def breather_precondition(sample0: MonitorSample) -> PreconditionReport:
    """Steady and expanding breathers/solitons force min R(0) < 0.

    On homogeneous metrics min R = R, so R >= 0 at t=0 excludes them
    (R = 0 sits on the boundary and still excludes). Returns the signed
    margin R.
    """
    excluded = sample0.R >= 0.0
    return PreconditionReport(
        classification="steady/expanding-excluded" if excluded else "possible",
        margin=sample0.R,
    )
