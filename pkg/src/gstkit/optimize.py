"""Levenberg-Marquardt minimisation of a smooth objective.

The caller provides ``model(x) -> (value, gradient, H)`` with ``H`` a positive
semidefinite curvature model (Gauss-Newton for least squares, Fisher
information for likelihoods) and ``value(x)`` for trial points.  Damping
follows the gain-ratio rule: ``mu`` shrinks by ``max(1/3, 1 - (2 rho - 1)^3)``
after a good step and grows geometrically after a rejected one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass
class LMConfig:
    gtol: float = 1e-10
    xtol: float = 1e-12
    ftol: float = 1e-15
    max_iter: int = 10_000
    tau: float = 1e-3
    mu_max: float = 1e16


@dataclass
class LMResult:
    x: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    accepted: int
    converged: bool
    reason: str
    trace: list = field(default_factory=list)  # (iteration, value, grad_norm) after each accepted step


def levenberg_marquardt(
    model: Callable[[np.ndarray], tuple[float, np.ndarray, np.ndarray]],
    value: Callable[[np.ndarray], float],
    x0: np.ndarray,
    cfg: LMConfig | None = None,
) -> LMResult:
    cfg = cfg or LMConfig()
    x = np.array(x0, dtype=float)
    f, g, H = model(x)
    gnorm = float(np.abs(g).max()) if g.size else 0.0
    trace = [(0, f, gnorm)]
    if gnorm <= cfg.gtol:
        return LMResult(x, f, gnorm, 0, 0, True, "gradient", trace)
    # The damping term is mu * diag(H), so mu itself is dimensionless.
    mu = cfg.tau
    nu = 2.0
    accepted = 0
    for it in range(1, cfg.max_iter + 1):
        # Marquardt scaling, floored so that flat (gauge) directions stay damped.
        d = np.maximum(np.diag(H), 1e-12 * max(np.diag(H).max(), 1e-300))
        a = H + mu * np.diag(d)
        try:
            step = -np.linalg.solve(a, g)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(a, g, rcond=None)[0]
        if np.linalg.norm(step) <= cfg.xtol * (np.linalg.norm(x) + cfg.xtol):
            return LMResult(x, f, gnorm, it, accepted, True, "step", trace)
        predicted = 0.5 * step @ (mu * d * step - g)
        x_new = x + step
        f_new = value(x_new)
        rho = (f - f_new) / predicted if predicted > 0 else -1.0
        if np.isfinite(f_new) and rho > 0:
            decrease = f - f_new
            x = x_new
            f, g, H = model(x)
            gnorm = float(np.abs(g).max())
            accepted += 1
            trace.append((it, f, gnorm))
            mu *= max(1 / 3, 1 - (2 * rho - 1) ** 3)
            nu = 2.0
            if gnorm <= cfg.gtol:
                return LMResult(x, f, gnorm, it, accepted, True, "gradient", trace)
            if decrease <= cfg.ftol * max(abs(f), 1.0):
                return LMResult(x, f, gnorm, it, accepted, True, "value", trace)
        else:
            mu *= nu
            nu *= 2
            if mu > cfg.mu_max:
                # No step of any length lowers the objective: numerical floor.
                return LMResult(x, f, gnorm, it, accepted, True, "stalled", trace)
    return LMResult(x, f, gnorm, cfg.max_iter, accepted, False, "max_iter", trace)
