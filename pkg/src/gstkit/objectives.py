"""chi^2 and log-likelihood objectives with analytic derivatives.

Probabilities are clipped to ``[eps, 1 - eps]`` wherever they enter a
denominator or a logarithm; the chi^2 numerator uses the raw probability.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .calculus import CircuitEvaluator, gateset_to_vector, vector_to_gateset
from .dataset import DataSet
from .gateset import GateSet

EPS_CLIP = 1e-6


def _xlogy(x, y):
    out = np.zeros(np.broadcast(x, y).shape)
    nz = np.broadcast_to(x, out.shape) != 0
    xb, yb = np.broadcast_to(x, out.shape), np.broadcast_to(y, out.shape)
    out[nz] = xb[nz] * np.log(yb[nz])
    return out


def max_logl_terms(shots, counts) -> np.ndarray:
    """Per-sequence ``N [f ln f + (1-f) ln(1-f)]``, the entropy bound on log L."""
    f = counts / shots
    return shots * (_xlogy(f, f) + _xlogy(1 - f, 1 - f))


def chi2_terms(p, shots, counts, eps: float = EPS_CLIP, order: int = 0):
    """Value (and first/second derivatives in p) of ``N (p - f)^2 / (q (1 - q))``."""
    p = np.asarray(p, dtype=float)
    f = counts / shots
    q = np.clip(p, eps, 1 - eps)
    inside = (p > eps) & (p < 1 - eps)
    u = p - f
    v = q * (1 - q)
    val = shots * u**2 / v
    if order == 0:
        return val
    a = 1 - 2 * q
    d1 = np.where(inside, shots * (2 * u / v - u**2 * a / v**2), 2 * shots * u / v)
    if order == 1:
        return val, d1
    d2 = np.where(
        inside,
        shots * (2 / v - 4 * u * a / v**2 + 2 * u**2 / v**2 + 2 * u**2 * a**2 / v**3),
        2 * shots / v,
    )
    return val, d1, d2


def chi2_residuals(p, shots, counts, eps: float = EPS_CLIP):
    """Residuals ``sqrt(N)(p - f)/sqrt(q(1-q))`` and their derivative in p."""
    p = np.asarray(p, dtype=float)
    f = counts / shots
    q = np.clip(p, eps, 1 - eps)
    inside = (p > eps) & (p < 1 - eps)
    v = q * (1 - q)
    r = np.sqrt(shots) * (p - f) / np.sqrt(v)
    dr = np.sqrt(shots) * (1 / np.sqrt(v) - np.where(inside, (p - f) * (1 - 2 * q) / (2 * v**1.5), 0.0))
    return r, dr


def logl_terms(p, shots, counts, eps: float = EPS_CLIP, order: int = 0):
    """``N [f ln q + (1 - f) ln(1 - q)]``; summands with a zero coefficient are dropped."""
    p = np.asarray(p, dtype=float)
    f = counts / shots
    q = np.clip(p, eps, 1 - eps)
    inside = (p > eps) & (p < 1 - eps)
    val = shots * (_xlogy(f, q) + _xlogy(1 - f, 1 - q))
    if order == 0:
        return val
    d1 = np.where(inside, shots * (f / q - (1 - f) / (1 - q)), 0.0)
    if order == 1:
        return val, d1
    d2 = np.where(inside, -shots * (f / q**2 + (1 - f) / (1 - q) ** 2), 0.0)
    return val, d1, d2


def two_delta_logl_terms(p, shots, counts, eps: float = EPS_CLIP) -> np.ndarray:
    return 2 * (max_logl_terms(shots, counts) - logl_terms(p, shots, counts, eps))


def pairwise_sum(x: np.ndarray) -> float:
    """Fixed-order pairwise reduction, independent of chunking or threads."""
    x = np.asarray(x, dtype=float).ravel()
    while x.size > 1:
        if x.size % 2:
            x = np.append(x, 0.0)
        x = x[0::2] + x[1::2]
    return float(x[0]) if x.size else 0.0


def chi2_objective(gs: GateSet, ds: DataSet, eps: float = EPS_CLIP) -> tuple[float, np.ndarray]:
    p = CircuitEvaluator(ds.sequences, gs.labels).probabilities(gs)
    terms = chi2_terms(p, ds.shots, ds.counts, eps)
    return pairwise_sum(terms), terms


def logl_objective(gs: GateSet, ds: DataSet, eps: float = EPS_CLIP) -> tuple[float, np.ndarray]:
    p = CircuitEvaluator(ds.sequences, gs.labels).probabilities(gs)
    terms = logl_terms(p, ds.shots, ds.counts, eps)
    return pairwise_sum(terms), terms


@dataclass
class Objective:
    """A dataset bound to an evaluator, as a function of the parameter vector.

    ``kind`` is ``"chi2"`` (value chi^2) or ``"logl"`` (value 2 Delta log L,
    i.e. minimised).  Both expose value, gradient, exact Hessian and the
    Gauss-Newton/Fisher model Hessian used by Levenberg-Marquardt.
    """

    kind: str
    ds: DataSet
    labels: Sequence[str]
    eps: float = EPS_CLIP

    def __post_init__(self):
        if self.kind not in ("chi2", "logl"):
            raise ValueError(f"unknown objective {self.kind!r}")
        self.evaluator = CircuitEvaluator(self.ds.sequences, self.labels)
        self._offset = max_logl_terms(self.ds.shots, self.ds.counts)

    def gateset(self, x) -> GateSet:
        return vector_to_gateset(x, self.labels)

    def vector(self, gs: GateSet) -> np.ndarray:
        return gateset_to_vector(gs)

    def _terms(self, p, order):
        n, c = self.ds.shots, self.ds.counts
        if self.kind == "chi2":
            return chi2_terms(p, n, c, self.eps, order)
        out = logl_terms(p, n, c, self.eps, order)
        if order == 0:
            return 2 * (self._offset - out)
        return (2 * (self._offset - out[0]),) + tuple(-2 * d for d in out[1:])

    def terms(self, x) -> np.ndarray:
        return self._terms(self.evaluator.probabilities(self.gateset(x)), 0)

    def value(self, x) -> float:
        return pairwise_sum(self.terms(x))

    def gradient(self, x) -> np.ndarray:
        p, jac = self.evaluator.jacobian(self.gateset(x))
        _, d1 = self._terms(p, 1)
        return d1 @ jac

    def hessian(self, x) -> np.ndarray:
        gs = self.gateset(x)
        p, jac = self.evaluator.jacobian(gs)
        _, d1, d2 = self._terms(p, 2)
        return (jac.T * d2) @ jac + self.evaluator.weighted_hessian(gs, d1)

    def model(self, x) -> tuple[float, np.ndarray, np.ndarray]:
        """Value, gradient and positive-semidefinite model Hessian."""
        p, jac = self.evaluator.jacobian(self.gateset(x))
        n, c = self.ds.shots, self.ds.counts
        if self.kind == "chi2":
            r, dr = chi2_residuals(p, n, c, self.eps)
            jr = jac * dr[:, None]
            return pairwise_sum(r**2), 2 * jr.T @ r, 2 * jr.T @ jr
        val, d1 = self._terms(p, 1)
        q = np.clip(p, self.eps, 1 - self.eps)
        inside = (p > self.eps) & (p < 1 - self.eps)
        fisher = np.where(inside, 2 * n / (q * (1 - q)), 0.0)
        return pairwise_sum(val), d1 @ jac, (jac.T * fisher) @ jac
