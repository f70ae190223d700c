"""Model-violation statistics: per-sequence 2 Delta log L, N_sigma, germ x L grids."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import chi2 as chi2_dist

from .calculus import CircuitEvaluator, n_params
from .dataset import DataSet
from .design import gauge_tangent_basis
from .errors import InputError
from .gateset import GateSet
from .objectives import EPS_CLIP, pairwise_sum, two_delta_logl_terms
from .sequences import GateSequence, format_sequence


def two_delta_logl(gs: GateSet, ds: DataSet, eps: float = EPS_CLIP) -> tuple[float, np.ndarray]:
    """Total and per-sequence ``2 (N H - log L)``."""
    p = CircuitEvaluator(ds.sequences, gs.labels).probabilities(gs)
    terms = two_delta_logl_terms(p, ds.shots, ds.counts, eps)
    return pairwise_sum(terms), terms


@dataclass(frozen=True)
class DofLedger:
    n_sequences: int
    n_params: int

    @property
    def k(self) -> int:
        return self.n_sequences - self.n_params


def effective_param_count(gs: GateSet) -> int:
    """Free TP parameters minus the numerical rank of the gauge tangent space."""
    return n_params(len(gs.labels)) - gauge_tangent_basis(gs, include_spam=True).rank


def n_sigma(total: float, ledger: DofLedger) -> float:
    k = ledger.k
    if k <= 0:
        raise InputError(f"degrees of freedom k = {k} must be positive")
    return (total - k) / np.sqrt(2 * k)


@dataclass
class GridCell:
    total: float
    count: int
    threshold: float = np.nan
    flagged: bool = False


@dataclass
class ViolationGrid:
    germs: list  # germ label tuples, row order
    lengths: list  # column order
    cells: dict  # (germ, L) -> GridCell
    unassigned: float = 0.0  # sequences without a germ (fiducial pairs etc.)
    alpha: float = 0.05
    extra: dict = field(default_factory=dict)

    @property
    def n_flagged(self) -> int:
        return sum(c.flagged for c in self.cells.values())

    @property
    def total(self) -> float:
        return float(sum(c.total for c in self.cells.values()) + self.unassigned)

    def rows(self):
        for g in self.germs:
            for L in self.lengths:
                c = self.cells.get((g, L))
                if c is not None:
                    yield "".join(g), L, c


def build_grid(values: np.ndarray, sequences: Sequence[GateSequence], alpha: float = 0.05) -> ViolationGrid:
    """Sum per-sequence values into (germ, L) cells and flag them with a Bonferroni-corrected chi^2 test.

    Each cell is compared with the chi^2 quantile at ``1 - alpha / n_cells``
    whose degrees of freedom equal the cell's sequence count (36 for a full
    cell of fiducial pairs).
    """
    values = np.asarray(values, dtype=float)
    if values.size != len(sequences):
        raise InputError("one value per sequence is required")
    sums: dict = {}
    counts: dict = {}
    germs: list = []
    lengths: set = set()
    unassigned = 0.0
    for v, s in zip(values, sequences):
        prov = s.provenance
        if prov is None or prov.germ is None:
            unassigned += v
            continue
        key = (prov.germ, prov.length)
        if prov.germ not in germs:
            germs.append(prov.germ)
        lengths.add(prov.length)
        sums[key] = sums.get(key, 0.0) + v
        counts[key] = counts.get(key, 0) + 1
    ncells = len(sums)
    cells = {}
    for key, tot in sums.items():
        thr = float(chi2_dist.ppf(1 - alpha / ncells, df=counts[key]))
        cells[key] = GridCell(float(tot), counts[key], thr, bool(tot > thr))
    return ViolationGrid(germs, sorted(lengths), cells, float(unassigned), alpha)


def violation_summary(gs: GateSet, ds: DataSet, eps: float = EPS_CLIP) -> dict:
    total, terms = two_delta_logl(gs, ds, eps)
    ledger = DofLedger(len(ds), effective_param_count(gs))
    grid = build_grid(terms, ds.sequences)
    return {
        "two_delta_logl": total,
        "k": ledger.k,
        "n_params": ledger.n_params,
        "n_sigma": n_sigma(total, ledger),
        "grid": grid,
        "terms": terms,
    }


def grid_table(grid: ViolationGrid) -> list:
    return [(g, L, c.total, c.count, c.flagged) for g, L, c in grid.rows()]


def sequence_label(s: GateSequence) -> str:
    return format_sequence(s)
