"""Gauge transformations and gauge optimization against a target gate set."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .errors import InputError
from .gateset import GateSet


@dataclass(frozen=True)
class GaugeWeights:
    gates: float = 1.0
    spam: float = 1e-3

    def __post_init__(self):
        if self.gates < 0 or self.spam < 0 or (self.gates == 0 and self.spam == 0):
            raise InputError("gauge weights must be >= 0 and not both zero")


def tp_gauge_matrix(params: np.ndarray) -> np.ndarray:
    """TP gauge element from its 12 free entries (rows 1..3); zero params give identity."""
    m = np.eye(4)
    m[1:] += np.asarray(params, dtype=float).reshape(3, 4)
    return m


def apply_gauge(gs: GateSet, m: np.ndarray, cond_max: float = 1e12) -> GateSet:
    """``G -> M G M^-1``, ``rho -> M rho``, ``E -> E M^-1``."""
    m = np.asarray(m, dtype=float)
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > cond_max or abs(np.linalg.det(m)) < 1e-12:
        raise InputError(f"gauge matrix is near-singular (condition number {cond:.3e})")
    minv = np.linalg.inv(m)
    gates = {k: m @ g @ minv for k, g in gs.gates.items()}
    return GateSet(m @ gs.rho, gs.effect @ minv, gates)


def gauge_distance(gs: GateSet, target: GateSet, w: GaugeWeights | None = None) -> float:
    w = w or GaugeWeights()
    val = w.gates * sum(np.sum((gs.gates[k] - target.gates[k]) ** 2) for k in target.labels)
    val += w.spam * (np.sum((gs.rho - target.rho) ** 2) + np.sum((gs.effect - target.effect) ** 2))
    return float(val)


@dataclass
class GaugeResult:
    gateset: GateSet
    gauge: np.ndarray
    objective: float
    converged: bool
    grad_norm: float


def _residuals(params, gs: GateSet, target: GateSet, w: GaugeWeights):
    m = tp_gauge_matrix(params)
    minv = np.linalg.inv(m)
    sg, ss = np.sqrt(w.gates), np.sqrt(w.spam)
    res, jac = [], []
    gens = np.zeros((12, 4, 4))
    for k in range(12):
        gens[k, 1 + k // 4, k % 4] = 1.0
    for lbl in target.labels:
        g = gs.gates[lbl]
        gt = m @ g @ minv
        res.append(sg * (gt - target.gates[lbl]).ravel())
        # d(M G M^-1) = dM G M^-1 - M G M^-1 dM M^-1
        d = np.einsum("kij,jl->kil", gens, g @ minv) - np.einsum("ij,kjl,lm->kim", gt, gens, minv)
        jac.append(sg * d.reshape(12, 16).T)
    rho = m @ gs.rho
    eff = gs.effect @ minv
    res.append(ss * (rho - target.rho))
    jac.append(ss * np.einsum("kij,j->ik", gens, gs.rho))
    res.append(ss * (eff - target.effect))
    jac.append(ss * -np.einsum("i,ij,kjl,lm->mk", gs.effect, minv, gens, minv))
    return np.concatenate(res), np.vstack(jac)


def optimize_gauge(
    gs: GateSet,
    target: GateSet,
    w: GaugeWeights | None = None,
    restarts: int = 5,
    spread: float = 0.1,
    seed: int = 0,
) -> GaugeResult:
    """Minimise the weighted Frobenius distance to `target` over TP gauge matrices.

    Starts from the identity and from `restarts` random near-identity points;
    the winner is the lowest objective, ties broken by start index.
    """
    w = w or GaugeWeights()
    if gs.labels != target.labels:
        raise InputError("gate set and target have different labels")
    rng = np.random.default_rng(seed)
    starts = [np.zeros(12)] + [rng.normal(0, spread, 12) for _ in range(restarts)]
    best = None
    for idx, x0 in enumerate(starts):
        try:
            sol = scipy.optimize.least_squares(
                lambda p: _residuals(p, gs, target, w)[0],
                x0,
                jac=lambda p: _residuals(p, gs, target, w)[1],
                method="lm",
                xtol=1e-15,
                ftol=1e-15,
                gtol=1e-15,
                max_nfev=2000,
            )
        except (np.linalg.LinAlgError, ValueError):
            continue
        obj = float(2 * sol.cost)
        if not np.isfinite(obj):
            continue
        cand = (obj, idx, sol)
        if best is None or cand[:2] < best[:2]:
            best = cand
    ident_obj = gauge_distance(gs, target, w)
    if best is None or best[0] > ident_obj:
        x, obj, ok, gnorm = np.zeros(12), ident_obj, False, float("nan")
        if best is not None:
            ok = True
    else:
        obj, _, sol = best
        x, ok = sol.x, sol.status > 0
        gnorm = float(np.abs(sol.jac.T @ sol.fun).max() * 2)
    m = tp_gauge_matrix(x)
    out = apply_gauge(gs, m)
    return GaugeResult(out, m, gauge_distance(out, target, w), ok, gnorm)
