"""Gate-quality metrics: infidelities, diamond distance, threshold verdicts."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import NumericalError
from .gateset import GateSet, choi_from_superop, error_generator

log = logging.getLogger(__name__)

THRESHOLDS = (6.7e-4, 1.94e-4)


def entanglement_fidelity(g: np.ndarray, g0: np.ndarray) -> float:
    """``Tr(J0 J) / 4`` with both Choi matrices of trace 2."""
    return float(np.real(np.trace(choi_from_superop(g0) @ choi_from_superop(g)))) / 4


def process_infidelity(g: np.ndarray, g0: np.ndarray) -> float:
    return 1.0 - entanglement_fidelity(g, g0)


def average_gate_infidelity(g: np.ndarray, g0: np.ndarray, d: int = 2) -> float:
    f = entanglement_fidelity(g, g0)
    return 1.0 - (d * f + 1) / (d + 1)


@dataclass(frozen=True)
class DiamondResult:
    value: float  # certified upper bound
    lower: float  # value attained by an explicit input state
    gap: float


def _partial_trace_out(x: np.ndarray) -> np.ndarray:
    """Trace over the first (output) factor of a 4x4 operator on out (x) in."""
    return np.einsum("aiaj->ij", x.reshape(2, 2, 2, 2))


def _psd_sqrt(s: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(s)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def _lower_bound(j: np.ndarray, sigma: np.ndarray) -> float:
    """``||(1 (x) sqrt(sigma)) J (1 (x) sqrt(sigma))||_1``, attained by a purification of sigma."""
    r = np.kron(np.eye(2), _psd_sqrt(sigma))
    return float(np.abs(np.linalg.eigvalsh(r @ j @ r)).sum())


def _certificate(j: np.ndarray, sigma: np.ndarray) -> float:
    """Dual-feasible upper bound built from the primal input state (inf if sigma is singular)."""
    w, v = np.linalg.eigh(sigma)
    if w.min() < 1e-7:
        return np.inf
    s_half = np.kron(np.eye(2), (v * np.sqrt(w)) @ v.conj().T)
    s_mhalf = np.kron(np.eye(2), (v / np.sqrt(w)) @ v.conj().T)
    ew, ev = np.linalg.eigh(s_half @ j @ s_half)
    kplus = (ev * np.clip(ew, 0, None)) @ ev.conj().T
    z = 2 * s_mhalf @ kplus @ s_mhalf
    z = (z + z.conj().T) / 2
    # Repair roundoff so that Z >= 2J and Z >= 0 hold exactly.
    shift = max(0.0, -np.linalg.eigvalsh(z - 2 * j).min(), -np.linalg.eigvalsh(z).min())
    z = z + shift * np.eye(4)
    return float(np.linalg.eigvalsh(_partial_trace_out(z)).max())


def _solve(prob) -> None:
    # Solver accuracy warnings are irrelevant: the result is certified afterwards.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            prob.solve(solver="CLARABEL", tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
        except Exception as exc:  # solver errors surface as a missing solution
            log.debug("SDP solver error: %s", exc)


def _solve_primal(j: np.ndarray):
    import cvxpy as cp

    w = cp.Variable((4, 4), hermitian=True)
    s = cp.Variable((2, 2), hermitian=True)
    cons = [w >> 0, cp.kron(np.eye(2), s) - w >> 0, cp.trace(s) == 1]
    prob = cp.Problem(cp.Maximize(2 * cp.real(cp.trace(j @ w))), cons)
    _solve(prob)
    if s.value is None:
        raise NumericalError(f"diamond-norm SDP failed ({prob.status})")
    sig = (s.value + s.value.conj().T) / 2
    w_, v_ = np.linalg.eigh(sig)
    w_ = np.clip(w_, 0, None)
    return (v_ * (w_ / w_.sum())) @ v_.conj().T


def _solve_dual(j: np.ndarray) -> float:
    import cvxpy as cp

    z = cp.Variable((4, 4), hermitian=True)
    y = cp.Variable()
    cons = [z >> 0, z - 2 * j >> 0, y * np.eye(2) - cp.partial_trace(z, [2, 2], axis=0) >> 0]
    prob = cp.Problem(cp.Minimize(y), cons)
    _solve(prob)
    if z.value is None:
        return np.inf
    zz = (z.value + z.value.conj().T) / 2
    shift = max(0.0, -np.linalg.eigvalsh(zz - 2 * j).min(), -np.linalg.eigvalsh(zz).min())
    return float(np.linalg.eigvalsh(_partial_trace_out(zz + shift * np.eye(4))).max())


def diamond_distance_certified(g: np.ndarray, g0: np.ndarray, gap_tol: float = 1e-8) -> DiamondResult:
    """``||g - g0||_diamond`` for trace-preserving g, g0 via the trace-annihilating SDP.

    The maximisation is ``2 max <J, W>`` over ``0 <= W <= 1 (x) sigma``.  Its
    optimal sigma yields both a lower bound (an explicit input state) and a
    dual-feasible upper bound; the explicit dual SDP is used when sigma is
    singular.  The problem is solved on the normalised Choi matrix and rescaled.
    """
    delta = np.asarray(g, dtype=float) - np.asarray(g0, dtype=float)
    j = choi_from_superop(delta)
    scale = float(np.abs(np.linalg.eigvalsh(j)).sum())
    if scale < 1e-15:
        return DiamondResult(0.0, 0.0, 0.0)
    jn = j / scale
    sigma = _solve_primal(jn)
    lower = _lower_bound(jn, sigma)
    upper = _certificate(jn, sigma)
    if upper - lower > gap_tol / scale:
        upper = min(upper, _solve_dual(jn))
    upper = max(upper, lower)
    gap = (upper - lower) * scale
    if not gap <= gap_tol:
        raise NumericalError(f"diamond-norm SDP gap {gap:.3e} exceeds {gap_tol:.1e}")
    return DiamondResult(upper * scale, lower * scale, gap)


def diamond_distance(g: np.ndarray, g0: np.ndarray) -> float:
    return diamond_distance_certified(g, g0).value


def threshold_verdict(value: float | None, radius: float | None, threshold: float) -> str:
    """"pass" iff the upper 95% bound is below the threshold."""
    if value is None or radius is None or not np.isfinite(radius):
        return "indeterminate"
    return "pass" if value + radius < threshold else "fail"


@dataclass
class GateMetrics:
    process_infidelity: float
    avg_gate_infidelity: float
    diamond_distance: float
    diamond_lower: float
    error_generator: np.ndarray | None
    intervals: dict = field(default_factory=dict)  # metric -> 95% half-width

    def verdicts(self) -> dict:
        r = self.intervals.get("diamond_distance")
        return {t: threshold_verdict(self.diamond_distance, r, t) for t in THRESHOLDS}


@dataclass
class MetricReport:
    gates: dict  # label -> GateMetrics

    def threshold_verdicts(self) -> dict:
        return {k: m.verdicts() for k, m in self.gates.items()}


def gate_metrics(g: np.ndarray, g0: np.ndarray) -> GateMetrics:
    dn = diamond_distance_certified(g, g0)
    try:
        gen = error_generator(g, g0)
    except NumericalError as exc:
        log.warning("error generator unavailable: %s", exc)
        gen = None
    return GateMetrics(process_infidelity(g, g0), average_gate_infidelity(g, g0), dn.value, dn.lower, gen)


def metric_report(gs: GateSet, target: GateSet, intervals: Mapping[str, Mapping[str, float]] | None = None) -> MetricReport:
    """All metrics in the single gauge of `gs` (gauge-optimise it first)."""
    out = {}
    for k in target.labels:
        m = gate_metrics(gs.gates[k], target.gates[k])
        if intervals and k in intervals:
            m.intervals = dict(intervals[k])
        out[k] = m
    return MetricReport(out)


def rb_rate_prediction(gs, target: GateSet | None = None, **kwargs):
    """Per-gate RB decay rate predicted by simulating the RB protocol on `gs`."""
    from .rb import predict_rb_rate

    return predict_rb_rate(gs, **kwargs)
