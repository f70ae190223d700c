"""Error bars: Hessian likelihood-ratio intervals and bootstrap ensembles.

Intervals are per quantity (one-dimensional), not a joint confidence region.
Derivatives are taken along the non-gauge directions that are orthogonal to
the gauge orbit in the gauge-optimization metric, so a quantity evaluated on
the gauge-optimized estimate is, to first order, unchanged by the projection.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.special

from .calculus import gateset_to_vector, vector_to_gateset
from .dataset import DataSet
from .design import gauge_generators, numerical_rank
from .errors import GSTError, InputError, NumericalError
from .gateset import GateSet
from .gauge import GaugeWeights, optimize_gauge
from .objectives import EPS_CLIP, Objective
from .simulate import exact_probabilities, sample_counts, stream

log = logging.getLogger(__name__)


def chi2_1_quantile(level: float = 0.95) -> float:
    """Quantile of the chi^2 distribution with one degree of freedom."""
    if not 0 < level < 1:
        raise InputError("level must lie in (0, 1)")
    return float(2 * scipy.special.erfinv(level) ** 2)


def metric_weights(gs: GateSet, w: GaugeWeights | None = None) -> np.ndarray:
    w = w or GaugeWeights()
    ng = 12 * len(gs.labels)
    return np.concatenate([np.full(ng, w.gates), np.full(7, w.spam)])


def non_gauge_basis(gs: GateSet, w: GaugeWeights | None = None) -> np.ndarray:
    """Orthonormal columns spanning the metric-orthogonal complement of the gauge tangent."""
    gen = gauge_generators(gs, include_spam=True)
    u, s, _ = np.linalg.svd(gen, full_matrices=False)
    tangent = u[:, : numerical_rank(s)]
    return scipy.linalg.null_space(tangent.T * metric_weights(gs, w))


@dataclass
class ProjectedHessian:
    """log L Hessian at ``x`` and its projection onto the non-gauge basis."""

    x: np.ndarray
    labels: tuple
    full: np.ndarray
    basis: np.ndarray
    h: np.ndarray
    indefinite: bool = False

    def gateset(self, y: np.ndarray | None = None) -> GateSet:
        x = self.x if y is None else self.x + self.basis @ y
        return vector_to_gateset(x, self.labels)


def logl_hessian(gs: GateSet, ds: DataSet, w: GaugeWeights | None = None, eps: float = EPS_CLIP) -> ProjectedHessian:
    """Analytic Hessian of log L (curvature plus Gauss-Newton term), projected off the gauge."""
    obj = Objective("logl", ds, gs.labels, eps)
    x = gateset_to_vector(gs)
    full = -0.5 * obj.hessian(x)  # objective is 2 Delta log L = const - 2 log L
    full = (full + full.T) / 2
    basis = non_gauge_basis(gs, w)
    h = basis.T @ full @ basis
    h = (h + h.T) / 2
    ev = np.linalg.eigvalsh(h)
    indefinite = bool(ev.max() > 1e-9 * max(1.0, np.abs(ev).max()))
    if indefinite:
        log.warning("projected log L Hessian is not negative definite; using its negative-definite part")
    return ProjectedHessian(x, gs.labels, full, basis, h, indefinite)


@dataclass
class Interval:
    estimate: float
    radius: float
    flagged: bool = False


def gradient_fd(f: Callable[[GateSet], float], ph: ProjectedHessian, step: float = 1e-6) -> np.ndarray:
    g = np.empty(ph.basis.shape[1])
    h = step * max(1.0, np.linalg.norm(ph.x) / np.sqrt(ph.x.size))
    for i in range(g.size):
        e = np.zeros(g.size)
        e[i] = h
        g[i] = (f(ph.gateset(e)) - f(ph.gateset(-e))) / (2 * h)
    return g


def confidence_interval(
    f: Callable[[GateSet], float],
    ph: ProjectedHessian,
    level: float = 0.95,
    step: float = 1e-6,
    grad: np.ndarray | None = None,
) -> Interval:
    """``f* +- sqrt(C1 g^T (-P(H))^-1 g)`` with C1 the chi^2_1 quantile at `level`."""
    c1 = chi2_1_quantile(level)
    g = gradient_fd(f, ph, step) if grad is None else grad
    est = f(ph.gateset())
    if not np.any(g):
        return Interval(est, 0.0)
    w, v = np.linalg.eigh(-ph.h)
    keep = w > 1e-12 * max(w.max(), 0.0)
    gv = v.T @ g
    if np.any(np.abs(gv[~keep]) > 1e-8 * np.linalg.norm(g)):
        return Interval(est, float("inf"), True)
    var = float(np.sum(gv[keep] ** 2 / w[keep]))
    return Interval(est, float(np.sqrt(c1 * var)), ph.indefinite)


def element_intervals(ph: ProjectedHessian, level: float = 0.95) -> dict:
    """Half-widths for every free gate-matrix element ``(label, row, col)``, computed exactly (linear f)."""
    c1 = chi2_1_quantile(level)
    w, v = np.linalg.eigh(-ph.h)
    keep = w > 1e-12 * max(w.max(), 0.0)
    inv = (v[:, keep] / w[keep]) @ v[:, keep].T
    cov = ph.basis @ inv @ ph.basis.T
    out = {}
    for k, lbl in enumerate(ph.labels):
        for r in range(3):
            for c in range(4):
                i = 12 * k + 4 * r + c
                out[(lbl, r + 1, c)] = float(np.sqrt(c1 * max(cov[i, i], 0.0)))
    return out


# -- bootstrap ----------------------------------------------------------------------


@dataclass
class BootstrapEnsemble:
    mode: str
    replicates: list  # gauge-optimised GateSets
    seeds: list  # replicate indices that succeeded
    dropped: int = 0
    reference: GateSet | None = None

    def std(self, f: Callable[[GateSet], float]) -> float:
        vals = np.array([f(g) for g in self.replicates])
        return float(np.std(vals, ddof=1))

    def element_std(self) -> dict:
        out = {}
        stack = {lbl: np.array([g.gates[lbl] for g in self.replicates]) for lbl in self.replicates[0].labels}
        for lbl, arr in stack.items():
            sd = arr.std(axis=0, ddof=1)
            for r in range(1, 4):
                for c in range(4):
                    out[(lbl, r, c)] = float(sd[r, c])
        return out


def resample_dataset(source, ds: DataSet, mode: str, seed: int, replicate: int) -> DataSet:
    if mode == "parametric":
        p = exact_probabilities(source, ds.sequences)
        # An unconstrained (non-CP) estimate can predict p slightly outside [0, 1].
        out = (p < -1e-9) | (p > 1 + 1e-9)
        if np.any(out):
            log.warning("clipping %d parametric probabilities outside [0, 1] (worst %.3g)", int(out.sum()), float(np.max(np.abs(p - np.clip(p, 0, 1)))))
        p = np.clip(p, 0.0, 1.0)
    elif mode == "nonparametric":
        p = ds.frequencies
    else:
        raise InputError(f"unknown bootstrap mode {mode!r}")
    counts = sample_counts(p, ds.shots, ds.sequences, seed, replicate + 1)
    return ds.with_counts(counts)


def bootstrap(
    ds: DataSet,
    estimate: GateSet,
    fit: Callable[[DataSet], GateSet],
    mode: str = "parametric",
    n_replicates: int = 100,
    seed: int = 0,
    weights: GaugeWeights | None = None,
    max_failure_fraction: float = 0.1,
) -> BootstrapEnsemble:
    """Resample, refit with `fit`, and gauge-optimise each replicate to `estimate`.

    Parametric replicates are simulated from `estimate` with the original
    shot counts; nonparametric ones redraw each count binomially from its
    observed frequency.  Replicate ``r`` uses the substream ``(seed, r + 1)``.
    """
    if n_replicates < 2:
        raise InputError("bootstrap needs at least 2 replicates")
    reps, seeds, dropped = [], [], 0
    for r in range(n_replicates):
        sample = resample_dataset(estimate, ds, mode, seed, r)
        try:
            g = fit(sample)
            g = optimize_gauge(g, estimate, weights).gateset
        except (GSTError, np.linalg.LinAlgError) as exc:
            log.warning("bootstrap replicate %d dropped: %s", r, exc)
            dropped += 1
            continue
        reps.append(g)
        seeds.append(r)
    if dropped > max_failure_fraction * n_replicates:
        raise NumericalError(f"{dropped} of {n_replicates} bootstrap refits failed")
    return BootstrapEnsemble(mode, reps, seeds, dropped, estimate)
