"""Ricci flow and normalized Ricci flow as matrix ODEs on the metric.

The unnormalized flow is dg/dt = -2 Ric(g); the normalized flow is
dg/dt = (2/n) R g - 2 Ric(g), where the average scalar curvature is R
itself because R is spatially constant on homogeneous metrics. The state
is the full symmetric matrix (n(n+1)/2 coordinates), integrated by
classical RK4 or the adaptive Fehlberg 4(5) pair with an SPD guard and a
curvature ceiling. Volume is carried as V0 sqrt(det g / det g0) with V0
the quotient covolume, so it always agrees with the determinant formula.

The two flows differ only by a rescaling in space and a reparametrization
in time; :func:`gauge_transform` implements that change of gauge and is
checked against direct normalized integration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson

from . import backend, jsonio
from .errors import (
    FlowKindError,
    IntegrationError,
    NonSPDMetricError,
    TooFewSamplesError,
)
from .geometry import (
    CurvatureData,
    LeftInvariantMetric,
    StructureConstants,
    curvature_from_arrays,
    geometry_from_dict,
    geometry_to_dict,
)
from .monitors import MonitorSample, centered_derivative

UNNORMALIZED = "unnormalized"
NORMALIZED = "normalized"
FLOW_KINDS = (UNNORMALIZED, NORMALIZED)

REACHED_T_END = "reached_t_end"
CURVATURE_BLOWUP = "curvature_blowup"
SPD_GUARD = "spd_guard"
MAX_STEPS = "max_steps"


def _garray(g) -> np.ndarray:
    return g.g if isinstance(g, LeftInvariantMetric) else np.asarray(g, dtype=float)


def ricci_rhs(sc: StructureConstants, g) -> np.ndarray:
    """-2 Ric(g), the unnormalized time derivative of the metric."""
    ric, _, _, _, _ = backend.curvature_core(sc.c, _garray(g))
    return -2.0 * ric


def normalized_rhs(sc: StructureConstants, g) -> np.ndarray:
    """(2/n) R g - 2 Ric(g); vanishes exactly on Einstein metrics."""
    garr = _garray(g)
    n = garr.shape[0]
    ric, _, R, _, _ = backend.curvature_core(sc.c, garr)
    return (2.0 / n) * R * garr - 2.0 * ric


@dataclass
class IntegratorConfig:
    """Step control and guard thresholds for :func:`integrate`."""

    method: str = "rkf45"
    step: float = 1e-3
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    t_end: float = 1.0
    max_steps: int = 200000
    min_eig_stop: float = 1e-8
    max_step: float = math.inf
    curvature_ceiling: float = 1e12

    def __post_init__(self):
        if self.method not in ("rk4", "rkf45"):
            raise ValueError(f"unknown method {self.method!r}; use 'rk4' or 'rkf45'")
        if self.step <= 0 or self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("step, rel_tol and abs_tol must be positive")
        if self.min_eig_stop <= 0:
            raise ValueError("min_eig_stop must be positive")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "step": self.step,
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "t_end": self.t_end,
            "max_steps": self.max_steps,
            "min_eig_stop": self.min_eig_stop,
            "max_step": self.max_step if math.isfinite(self.max_step) else None,
            "curvature_ceiling": self.curvature_ceiling,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IntegratorConfig":
        d = dict(d)
        if d.get("max_step") is None:
            d["max_step"] = math.inf
        return cls(**d)


@dataclass(frozen=True)
class FlowState:
    """One time slice of a flow: metric, quotient volume, flow kind."""

    t: float
    g: LeftInvariantMetric
    V: float
    kind: str


@dataclass(frozen=True)
class TrajectorySample:
    state: FlowState
    curvature: CurvatureData
    monitor: MonitorSample


# Fehlberg 4(5) tableau; the 4th-order solution is propagated and the
# difference to the 5th-order one drives the step controller.
_FEHLBERG_C = (0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2)
_FEHLBERG_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
)
_FEHLBERG_B4 = (25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0)
_FEHLBERG_ERR = (1 / 360, 0.0, -128 / 4275, -2197 / 75240, 1 / 50, 2 / 55)


class Trajectory:
    """Time-ordered samples of one flow plus the accepted-node data.

    Samples carry (FlowState, CurvatureData, MonitorSample); accepted
    integration nodes (time, packed metric, packed derivative) support
    cubic Hermite dense output via :meth:`sample_at`.
    """

    def __init__(self, kind, sc, g0, volume0, config, samples, termination,
                 node_t, node_y, node_f):
        self.kind = kind
        self.sc = sc
        self.g0 = g0
        self.volume0 = float(volume0)
        self.config = config
        self.samples = list(samples)
        self.termination = termination
        self._node_t = np.asarray(node_t, dtype=float)
        self._node_y = np.asarray(node_y, dtype=float)
        self._node_f = np.asarray(node_f, dtype=float)
        ts = self.times
        if len(ts) > 1 and not np.all(np.diff(ts) > 0):
            raise ValueError("trajectory sample times must be strictly increasing")

    @property
    def dim(self) -> int:
        return self.g0.dim

    @property
    def times(self) -> np.ndarray:
        return np.array([s.state.t for s in self.samples])

    @property
    def t_final(self) -> float:
        return self.samples[-1].state.t

    def metric(self, i: int) -> np.ndarray:
        return self.samples[i].state.g.g

    def sample_at(self, times: Sequence[float]) -> list:
        """Metric matrices at arbitrary times by cubic Hermite interpolation."""
        n = self.dim
        iu = np.triu_indices(n)
        out = []
        tn = self._node_t
        for tau in np.atleast_1d(np.asarray(times, dtype=float)):
            if tau < tn[0] - 1e-12 or tau > tn[-1] + 1e-12:
                raise ValueError(f"time {tau} outside trajectory range [{tn[0]}, {tn[-1]}]")
            k = int(np.clip(np.searchsorted(tn, tau) - 1, 0, len(tn) - 2))
            h = tn[k + 1] - tn[k]
            s = (tau - tn[k]) / h
            h00 = (1 + 2 * s) * (1 - s) ** 2
            h10 = s * (1 - s) ** 2
            h01 = s * s * (3 - 2 * s)
            h11 = s * s * (s - 1)
            y = (h00 * self._node_y[k] + h * h10 * self._node_f[k]
                 + h01 * self._node_y[k + 1] + h * h11 * self._node_f[k + 1])
            out.append(_unpack(y, n, iu))
        return out

    def subsample(self, stride: int) -> "Trajectory":
        """View with every stride-th sample (node data shared)."""
        if stride < 1:
            raise ValueError("stride must be >= 1")
        return Trajectory(self.kind, self.sc, self.g0, self.volume0, self.config,
                          self.samples[::stride], self.termination,
                          self._node_t, self._node_y, self._node_f)

    # -- serialization ----------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "schema": 1,
            "kind": self.kind,
            "termination": self.termination,
            "geometry": geometry_to_dict(self.sc, self.g0, self.volume0),
            "integrator": self.config.to_dict(),
            "samples": [
                {
                    "t": s.state.t,
                    "g": [[float(x) for x in row] for row in s.state.g.g],
                    "V": s.state.V,
                    "R": s.monitor.R,
                    "ricci": [[float(x) for x in row] for row in s.curvature.ricci],
                    "ricci_eigs": [float(x) for x in s.curvature.ricci_eigs],
                    "einstein_dev": s.monitor.einstein_dev,
                    "ric2": s.monitor.ric2,
                    "RV2n": s.monitor.RV2n,
                    "perelman_lambda": s.monitor.perelman_lambda,
                }
                for s in self.samples
            ],
        }

    def to_json(self, path: str) -> None:
        jsonio.write_json(path, self.to_json_dict())

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Trajectory":
        sc, g0, volume0 = geometry_from_dict(doc["geometry"])
        config = IntegratorConfig.from_dict(doc["integrator"])
        kind = doc["kind"]
        if kind not in FLOW_KINDS:
            raise FlowKindError(f"unknown flow kind {kind!r}")
        n = sc.dim
        iu = np.triu_indices(n)
        samples = []
        node_t, node_y, node_f = [], [], []
        rhs = ricci_rhs if kind == UNNORMALIZED else normalized_rhs
        for rec in doc["samples"]:
            g = LeftInvariantMetric(np.asarray(rec["g"], dtype=float))
            state = FlowState(t=float(rec["t"]), g=g, V=float(rec["V"]), kind=kind)
            curv = CurvatureData(
                ricci=np.asarray(rec["ricci"], dtype=float),
                scalar=float(rec["R"]),
                einstein_dev=float(rec["einstein_dev"]),
                ric2=float(rec["ric2"]),
                ricci_eigs=np.asarray(rec["ricci_eigs"], dtype=float),
            )
            mon = MonitorSample(
                t=state.t, R=float(rec["R"]), RV2n=float(rec["RV2n"]),
                einstein_dev=float(rec["einstein_dev"]), ric2=float(rec["ric2"]),
                perelman_lambda=float(rec["perelman_lambda"]), V=state.V,
            )
            samples.append(TrajectorySample(state, curv, mon))
            node_t.append(state.t)
            node_y.append(_pack(g.g, iu))
            node_f.append(_pack(rhs(sc, g.g), iu))
        return cls(kind, sc, g0, volume0, config, samples, doc["termination"],
                   node_t, node_y, node_f)

    @classmethod
    def from_json(cls, path: str) -> "Trajectory":
        return cls.from_json_dict(jsonio.load(path))

    def to_csv(self, path: str) -> None:
        n = self.dim
        iu = np.triu_indices(n)
        names = [f"g_{i + 1}{j + 1}" for i, j in zip(*iu)]
        header = (["t"] + names + ["V", "R"]
                  + [f"ricci_eig_{k + 1}" for k in range(n)]
                  + ["einstein_dev", "RV2n"])
        lines = [",".join(header)]
        for s in self.samples:
            row = ([s.state.t] + list(s.state.g.g[iu]) + [s.state.V, s.monitor.R]
                   + list(s.curvature.ricci_eigs) + [s.monitor.einstein_dev, s.monitor.RV2n])
            lines.append(",".join(format(float(x), ".17g") for x in row))
        lines.append(f"# termination={self.termination}")
        jsonio.write_atomic(path, "\n".join(lines) + "\n")


def _pack(m: np.ndarray, iu) -> np.ndarray:
    return m[iu]


def _unpack(v: np.ndarray, n: int, iu) -> np.ndarray:
    m = np.zeros((n, n))
    m[iu] = v
    m[(iu[1], iu[0])] = v
    return m


def integrate(
    sc: StructureConstants,
    g0: LeftInvariantMetric,
    volume0: float = 1.0,
    kind: str = UNNORMALIZED,
    config: Optional[IntegratorConfig] = None,
    sampler: Optional[Callable] = None,
    sample_times: Optional[Sequence[float]] = None,
) -> Trajectory:
    """Integrate one flow from g0 and return the sampled trajectory.

    Samples sit at integrator-accepted steps, plus cubic-Hermite dense
    output at the requested sample_times; every sample carries freshly
    computed curvature, and V comes from V0 sqrt(det g / det g0). The run
    halts at t_end, on the SPD guard (smallest metric eigenvalue below
    min_eig_stop), on the curvature ceiling |Ric|^2_g > curvature_ceiling,
    or after max_steps; the reason is recorded on the trajectory. The
    optional sampler callback observes accepted samples and must not
    mutate integration state.
    """
    if kind not in FLOW_KINDS:
        raise FlowKindError(f"unknown flow kind {kind!r}; use one of {FLOW_KINDS}")
    if volume0 <= 0:
        raise ValueError("volume0 must be positive")
    config = config if config is not None else IntegratorConfig()
    n = sc.dim
    iu = np.triu_indices(n)
    c = sc.c
    det0 = float(np.linalg.det(g0.g))

    def rhs(y: np.ndarray) -> np.ndarray:
        gmat = _unpack(y, n, iu)
        ric, _, R, _, _ = backend.curvature_core(c, gmat)
        if kind == UNNORMALIZED:
            dg = -2.0 * ric
        else:
            dg = (2.0 / n) * R * gmat - 2.0 * ric
        return _pack(dg, iu)

    y0 = _pack(g0.g, iu)
    if config.method == "rk4":
        node_t, node_y, node_f, termination = _run_rk4(rhs, y0, config, n, iu, config.curvature_ceiling, c)
    else:
        node_t, node_y, node_f, termination = _run_rkf45(rhs, y0, config, n, iu, config.curvature_ceiling, c)

    samples = []
    for t, y in zip(node_t, node_y):
        samples.append(_make_sample(sc, t, _unpack(y, n, iu), volume0, det0, kind))

    traj = Trajectory(kind, sc, g0, volume0, config, samples, termination,
                      node_t, node_y, node_f)

    if sample_times is not None:
        extra = []
        tn = traj._node_t
        for tau in sorted(float(x) for x in sample_times):
            if tau < tn[0] or tau > tn[-1]:
                continue
            if np.min(np.abs(tn - tau)) <= 1e-12 * max(1.0, abs(tau)):
                continue
            gmat = traj.sample_at([tau])[0]
            extra.append(_make_sample(sc, tau, gmat, volume0, det0, kind))
        if extra:
            merged = sorted(samples + extra, key=lambda s: s.state.t)
            traj = Trajectory(kind, sc, g0, volume0, config, merged, termination,
                              node_t, node_y, node_f)

    if sampler is not None:
        for s in traj.samples:
            sampler(s.state, s.curvature)
    return traj


def _make_sample(sc, t, gmat, volume0, det0, kind) -> TrajectorySample:
    gmat = 0.5 * (gmat + gmat.T)
    curv = curvature_from_arrays(sc.c, gmat)
    V = volume0 * math.sqrt(float(np.linalg.det(gmat)) / det0)
    state = FlowState(t=float(t), g=LeftInvariantMetric(gmat), V=V, kind=kind)
    mon = MonitorSample.from_curvature(float(t), V, curv, sc.dim)
    return TrajectorySample(state, curv, mon)


def _guard(gmat: np.ndarray, c: np.ndarray, config: IntegratorConfig):
    """None if the state is healthy, else the termination reason."""
    eigs = np.linalg.eigvalsh(gmat)
    if eigs[0] < config.min_eig_stop:
        return SPD_GUARD
    _, _, _, ric2, _ = backend.curvature_core(c, gmat)
    if ric2 > config.curvature_ceiling:
        return CURVATURE_BLOWUP
    return None


def _run_rk4(rhs, y0, config, n, iu, ceiling, c):
    t, y = 0.0, y0.copy()
    f = rhs(y)
    node_t, node_y, node_f = [t], [y.copy()], [f.copy()]
    termination = MAX_STEPS
    steps = 0
    while steps < config.max_steps:
        if t >= config.t_end - 1e-15 * config.t_end:
            termination = REACHED_T_END
            break
        h = min(config.step, config.t_end - t)
        try:
            k1 = f
            k2 = rhs(y + 0.5 * h * k1)
            k3 = rhs(y + 0.5 * h * k2)
            k4 = rhs(y + h * k3)
        except NonSPDMetricError:
            termination = SPD_GUARD
            break
        y_new = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t_new = t + h
        gmat = _unpack(y_new, n, iu)
        try:
            reason = _guard(gmat, c, config)
        except NonSPDMetricError:
            reason = SPD_GUARD
        if reason is not None:
            termination = reason
            break
        t, y = t_new, y_new
        f = rhs(y)
        node_t.append(t)
        node_y.append(y.copy())
        node_f.append(f.copy())
        steps += 1
    else:
        termination = MAX_STEPS
    return node_t, node_y, node_f, termination


def _run_rkf45(rhs, y0, config, n, iu, ceiling, c):
    t, y = 0.0, y0.copy()
    try:
        f = rhs(y)
    except NonSPDMetricError:
        raise NonSPDMetricError("initial metric is not positive definite") from None
    node_t, node_y, node_f = [t], [y.copy()], [f.copy()]
    termination = MAX_STEPS
    h = min(config.step, config.max_step, config.t_end)
    steps = 0
    while steps < config.max_steps:
        if t >= config.t_end * (1.0 - 1e-15):
            termination = REACHED_T_END
            break
        h = min(h, config.t_end - t, config.max_step)
        if h < 1e-13 * max(1.0, t):
            raise IntegrationError(
                f"step size underflow at t = {t:.12g}: adaptive controller "
                f"cannot meet tolerance (rel_tol={config.rel_tol:g})", t=t)
        ks = [f]
        ok = True
        try:
            for i in range(1, 6):
                yi = y + h * sum(a * k for a, k in zip(_FEHLBERG_A[i], ks))
                ks.append(rhs(yi))
        except NonSPDMetricError:
            ok = False
        if ok:
            y_new = y + h * sum(b * k for b, k in zip(_FEHLBERG_B4, ks))
            err_vec = h * sum(e * k for e, k in zip(_FEHLBERG_ERR, ks))
            scale = config.abs_tol + config.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
            if not math.isfinite(err):
                ok = False
        if not ok:
            h *= 0.5
            steps += 1
            continue
        if err <= 1.0:
            t_new = t + h
            gmat = _unpack(y_new, n, iu)
            try:
                reason = _guard(gmat, c, config)
                f_new = rhs(y_new)
            except NonSPDMetricError:
                reason = SPD_GUARD
            if reason is not None:
                termination = reason
                break
            t, y, f = t_new, y_new, f_new
            node_t.append(t)
            node_y.append(y.copy())
            node_f.append(f.copy())
        fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        h *= fac
        steps += 1
    else:
        termination = MAX_STEPS
    return node_t, node_y, node_f, termination


def volume_law_residual(traj: Trajectory, eps_den: float = 1e-12) -> float:
    """Worst relative defect of dV/dt = -R V along an unnormalized trajectory.

    dV/dt is estimated by centered differences on the sample times; the
    law only holds for the unnormalized flow (the normalized flow keeps V
    constant, which is a separate check).
    """
    if traj.kind != UNNORMALIZED:
        raise FlowKindError("the volume law dV/dt = -R V applies to the unnormalized flow")
    if len(traj.samples) < 3:
        raise TooFewSamplesError("volume_law_residual needs at least 3 samples")
    t = traj.times
    V = np.array([s.state.V for s in traj.samples])
    R = np.array([s.monitor.R for s in traj.samples])
    fd = centered_derivative(t, V)
    resid = np.abs(fd + R[1:-1] * V[1:-1]) / (np.abs(R[1:-1]) * V[1:-1] + eps_den)
    return float(np.max(resid))


def gauge_transform(traj: Trajectory) -> Trajectory:
    """Rescale an unnormalized trajectory into normalized-flow gauge.

    g~(t~) = (V0/V(t))^{2/n} g(t) with t~ = integral of (V0/V)^{2/n} ds
    (cumulative Simpson over the sample times). The result has constant
    volume V0 and solves the normalized flow, so its node derivatives are
    filled from the normalized right-hand side.
    """
    if traj.kind != UNNORMALIZED:
        raise FlowKindError("gauge_transform consumes unnormalized trajectories")
    if len(traj.samples) < 2:
        raise TooFewSamplesError("gauge_transform needs at least 2 samples")
    n = traj.dim
    iu = np.triu_indices(n)
    sc = traj.sc
    V0 = traj.volume0
    t = traj.times
    V = np.array([s.state.V for s in traj.samples])
    w = (V0 / V) ** (2.0 / n)
    t_tilde = cumulative_simpson(w, x=t, initial=0.0)

    g0_tilde = w[0] * traj.samples[0].state.g.g
    det0 = float(np.linalg.det(g0_tilde))
    samples, node_y, node_f = [], [], []
    for i, s in enumerate(traj.samples):
        gmat = w[i] * s.state.g.g
        smp = _make_sample(sc, t_tilde[i], gmat, V0, det0, NORMALIZED)
        samples.append(smp)
        node_y.append(_pack(smp.state.g.g, iu))
        node_f.append(_pack(normalized_rhs(sc, smp.state.g.g), iu))
    return Trajectory(NORMALIZED, sc, samples[0].state.g, V0, traj.config, samples,
                      traj.termination, t_tilde, node_y, node_f)
