"""LGST seed, iterative min-chi^2 over growing L, and the final MLE."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .design import FiducialSet, SequenceCatalog, build_catalog, default_fiducials, default_germs, default_schedule, lgst_sequences
from .dataset import DataSet
from .errors import GSTError, InputError, NumericalError
from .gateset import SQRT2, GateSet, truncate_gateset_to_cp
from .gauge import GaugeWeights, apply_gauge, optimize_gauge
from .objectives import EPS_CLIP, Objective
from .optimize import LMConfig, LMResult, levenberg_marquardt
from .sequences import GateSequence

log = logging.getLogger(__name__)


@dataclass
class FitConfig:
    max_length: int = 8192
    schedule: tuple[int, ...] | None = None
    prob_clip: float = EPS_CLIP
    gtol: float = 1e-10
    xtol: float = 1e-12
    max_iter: int = 10_000
    gauge_weights: GaugeWeights = field(default_factory=GaugeWeights)
    # The LGST seed is only O(1/sqrt(N)) accurate in its gates, so it is
    # gauge-matched with SPAM weighted equally.
    seed_gauge_weights: GaugeWeights = field(default_factory=lambda: GaugeWeights(1.0, 1.0))

    def __post_init__(self):
        if not 0 < self.prob_clip < 0.1:
            raise InputError("prob_clip must lie in (0, 0.1)")
        if self.schedule is None:
            self.schedule = default_schedule(self.max_length)
        self.schedule = tuple(L for L in self.schedule if L <= self.max_length)

    def lm(self) -> LMConfig:
        return LMConfig(gtol=self.gtol, xtol=self.xtol, max_iter=self.max_iter)


# -- LGST -------------------------------------------------------------------------


def lgst(ds: DataSet, fiducials: FiducialSet | None = None, target: GateSet | None = None, rank_rtol: float = 1e-6) -> GateSet:
    """Linear-inversion estimate, returned TP and in the target's approximate frame.

    With ``U S V^T`` the rank-4 SVD of the 6x6 Gram matrix, ``A = S^-1/2 U^T``
    and ``B = V S^-1/2`` map fiducial data onto a 4-dimensional frame.  The
    frame is then moved near the target's and made exactly TP.
    """
    from .gateset import ideal_gateset

    fiducials = fiducials or default_fiducials()
    target = target or ideal_gateset()
    pairs, sandwiches = lgst_sequences(fiducials, target.labels)

    def freq(grid):
        try:
            return np.array([[ds.frequency_of(s) for s in row] for row in grid])
        except KeyError as exc:
            raise InputError(f"dataset lacks LGST sequence {exc.args[0]}") from None

    gram = freq(pairs)
    u, s, vt = np.linalg.svd(gram)
    if np.sum(s > rank_rtol * s[0]) < 4:
        raise NumericalError(f"Gram matrix has fewer than 4 significant singular values: {s}")
    a = np.diag(s[:4] ** -0.5) @ u[:, :4].T
    b = vt[:4].T @ np.diag(s[:4] ** -0.5)
    gates = {k: a @ freq(grid) @ b for k, grid in sandwiches.items()}
    # Row of meas-fiducial data in the empty-preparation column, etc.
    rho = a @ gram[:, 0] if len(fiducials.prep[0]) == 0 else a @ _prep_vector(ds, fiducials)
    effect = (gram[0] if len(fiducials.meas[0]) == 0 else _meas_vector(ds, fiducials)) @ b
    unit = np.ones(len(fiducials.prep)) @ b
    # Move to the target frame: M0 = A R_target with R_target the target's fiducial effects.
    from .gateset import sequence_product

    r_target = np.array([target.effect @ sequence_product(target, f) for f in fiducials.meas])
    m0 = a @ r_target
    est = apply_gauge(GateSet(rho, effect, gates), np.linalg.inv(m0), cond_max=1e14)
    unit = unit @ m0
    m1 = np.eye(4)
    m1[0] = unit / SQRT2
    est = apply_gauge(est, m1, cond_max=1e14)
    gates = {}
    for k, g in est.gates.items():
        g = g.copy()
        g[0] = [1.0, 0, 0, 0]
        gates[k] = g
    rho = est.rho.copy()
    rho[0] = 1 / SQRT2
    return GateSet(rho, est.effect, gates)


def _prep_vector(ds, fiducials):
    from .sequences import EMPTY
    from .design import _sandwich

    return np.array([ds.frequency_of(_sandwich(EMPTY, EMPTY, fj, None)) for fj in fiducials.meas])


def _meas_vector(ds, fiducials):
    from .sequences import EMPTY
    from .design import _sandwich

    return np.array([ds.frequency_of(_sandwich(fi, EMPTY, EMPTY, None)) for fi in fiducials.prep])


# -- stage fits -------------------------------------------------------------------


@dataclass
class StageResult:
    name: str
    gateset: GateSet
    objective: float
    seed_objective: float
    lm: LMResult
    n_sequences: int

    @property
    def converged(self) -> bool:
        return self.lm.converged


def fit_stage(seed: GateSet, ds: DataSet, objective: str, cfg: FitConfig | None = None, name: str = "") -> StageResult:
    """Local optimum of chi^2 or 2 Delta log L over the TP parameterization, seeded at `seed`."""
    cfg = cfg or FitConfig()
    if not seed.is_tp(1e-9):
        raise InputError("fit_stage needs a TP seed")
    obj = Objective(objective, ds, seed.labels, cfg.prob_clip)
    x0 = obj.vector(seed)
    res = levenberg_marquardt(obj.model, obj.value, x0, cfg.lm())
    f0 = res.trace[0][1]
    if not res.converged:
        log.warning("%s stage hit the iteration cap (gradient %.3e)", name or objective, res.grad_norm)
    return StageResult(name or objective, obj.gateset(res.x), res.value, f0, res, len(ds))


@dataclass
class EstimateBundle:
    target: GateSet
    lgst: GateSet
    seed: GateSet
    iterations: dict  # L -> GateSet (min chi^2)
    stages: list  # StageResult, in order
    mle: GateSet | None
    final: GateSet | None  # gauge-optimised MLE
    gauge: np.ndarray | None
    residuals: dict = field(default_factory=dict)  # per-sequence table for the final fit
    failed: str | None = None

    @property
    def ok(self) -> bool:
        return self.failed is None


def stage_sequences(sequences: Sequence[GateSequence], L: int) -> list[GateSequence]:
    return [s for s in sequences if s.provenance is not None and s.provenance.length <= L]


def run_pipeline(
    ds: DataSet,
    target: GateSet,
    fiducials: FiducialSet | None = None,
    germs: Sequence[GateSequence] | None = None,
    cfg: FitConfig | None = None,
    catalog: SequenceCatalog | None = None,
) -> EstimateBundle:
    """LGST -> gauge-optimise -> CP-truncate -> chi^2 for each L -> MLE -> gauge-optimise."""
    cfg = cfg or FitConfig()
    fiducials = fiducials or default_fiducials()
    if catalog is None:
        catalog = build_catalog(fiducials, germs if germs is not None else default_germs(), cfg.schedule, target.labels)
    seqs = [catalog.sequences[catalog.index(s)] if s in catalog else s for s in ds.sequences]
    ds = DataSet(seqs, ds.shots, ds.counts)
    bundle = EstimateBundle(target, None, None, {}, [], None, None, None)
    try:
        est = lgst(ds, fiducials, target)
        bundle.lgst = est
        est = optimize_gauge(est, target, cfg.seed_gauge_weights).gateset
        est = truncate_gateset_to_cp(est)
        bundle.seed = est
        for L in cfg.schedule:
            sub = ds.subset(stage_sequences(seqs, L))
            st = fit_stage(est, sub, "chi2", cfg, name=f"chi2_L{L}")
            bundle.stages.append(st)
            est = st.gateset
            bundle.iterations[L] = est
        final = ds.subset(stage_sequences(seqs, cfg.schedule[-1]))
        st = fit_stage(est, final, "logl", cfg, name="mle")
        bundle.stages.append(st)
        bundle.mle = st.gateset
        g = optimize_gauge(st.gateset, target, cfg.gauge_weights)
        bundle.final, bundle.gauge = g.gateset, g.gauge
        obj = Objective("logl", final, target.labels, cfg.prob_clip)
        p = obj.evaluator.probabilities(bundle.final)
        bundle.residuals = {
            "sequences": final.sequences,
            "probabilities": p,
            "frequencies": final.frequencies,
            "shots": final.shots,
            "two_delta_logl": obj._terms(p, 0),
        }
    except GSTError as exc:
        bundle.failed = f"{type(exc).__name__}: {exc}"
        log.error("pipeline failed: %s", bundle.failed)
    return bundle
