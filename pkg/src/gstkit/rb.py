"""Single-qubit Clifford randomized benchmarking on simulated models."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit

from .errors import InputError, NumericalError
from .gateset import GateSet, ideal_gateset
from .simulate import CompositeModel, stream

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CliffordTable:
    """The 24 single-qubit Cliffords as ideal PTMs with minimal {Gx, Gy} compilations.

    Index 0 is the identity, compiled as a single idle ``Gi``.
    """

    ptms: np.ndarray  # (24, 4, 4)
    words: tuple  # label tuples in time order
    mul: np.ndarray  # mul[a, b] = index of C_a C_b (b applied first)
    inv: np.ndarray

    @property
    def mean_length(self) -> float:
        return float(np.mean([len(w) for w in self.words]))

    def lookup(self, ptm: np.ndarray) -> int:
        d = np.abs(self.ptms - ptm).reshape(24, -1).max(axis=1)
        k = int(np.argmin(d))
        if d[k] > 1e-8:
            raise NumericalError("matrix is not a Clifford")
        return k


def build_clifford_table(max_word: int = 8) -> CliffordTable:
    """Breadth-first search over words; ties go to the lexicographically smallest word."""
    ideal = ideal_gateset()
    gen = {"Gx": ideal.gates["Gx"], "Gy": ideal.gates["Gy"]}
    found: dict[bytes, tuple] = {}
    mats: list[np.ndarray] = []
    words: list[tuple] = []

    def key(m):
        return np.round(m, 8).tobytes()

    found[key(np.eye(4))] = ("Gi",)
    mats.append(np.eye(4))
    words.append(("Gi",))
    for n in range(1, max_word + 1):
        for w in itertools.product(sorted(gen), repeat=n):
            m = np.eye(4)
            for lbl in w:
                m = gen[lbl] @ m
            k = key(m)
            if k not in found:
                found[k] = w
                mats.append(m)
                words.append(w)
        if len(mats) == 24:
            break
    if len(mats) != 24:
        raise NumericalError("Clifford search did not close")
    ptms = np.array(mats)
    table = CliffordTable(ptms, tuple(words), np.zeros((24, 24), int), np.zeros(24, int))
    for a in range(24):
        for b in range(24):
            table.mul[a, b] = table.lookup(ptms[a] @ ptms[b])
        table.inv[a] = int(np.nonzero(table.mul[a] == 0)[0][0])
    return table


def word_ptm(word, gs: GateSet | None = None) -> np.ndarray:
    gs = gs or ideal_gateset()
    m = np.eye(4)
    for lbl in word:
        m = gs.gates[lbl] @ m
    return m


# -- design and simulation ------------------------------------------------------


@dataclass(frozen=True)
class RBDesign:
    """``lengths`` counts the random Cliffords before the final recovery Clifford."""

    lengths: tuple
    n_sequences: int = 50
    seed: int = 0

    def __post_init__(self):
        if not self.lengths or min(self.lengths) < 0 or self.n_sequences < 1:
            raise InputError("RB lengths must be non-negative and n_sequences >= 1")


@dataclass
class RBSequence:
    length: int
    index: int
    cliffords: np.ndarray  # indices, including the final recovery

    def gates(self, table: CliffordTable) -> tuple:
        return tuple(lbl for c in self.cliffords for lbl in table.words[c])


def rb_sequences(design: RBDesign, table: CliffordTable | None = None) -> list[RBSequence]:
    """Random Clifford strings whose ideal net action is a bit flip (ends in the bright state)."""
    table = table or build_clifford_table()
    flip = table.lookup(word_ptm(("Gx", "Gx")))
    out = []
    for m in design.lengths:
        for i in range(design.n_sequences):
            rng = stream(design.seed, 0, f"rb|{m}|{i}")
            cs = rng.integers(0, 24, size=m)
            net = 0
            for c in cs:
                net = table.mul[c, net]
            final = table.mul[flip, table.inv[net]]
            out.append(RBSequence(m, i, np.append(cs, final)))
    return out


@dataclass
class RBTable:
    length_cliffords: np.ndarray  # random + recovery
    length_gates: np.ndarray
    probabilities: np.ndarray
    shots: np.ndarray
    counts: np.ndarray
    seed: int

    @property
    def survival(self) -> np.ndarray:
        return self.counts / self.shots


def _model_matrices(model, table: CliffordTable):
    if isinstance(model, CompositeModel):
        rho, eff, gates = model.lifted()
    elif isinstance(model, GateSet):
        rho, eff, gates = model.rho, model.effect, model.gates
    else:
        raise InputError("RB model must be a GateSet or CompositeModel")
    dim = rho.size
    mats = np.empty((24, dim, dim))
    for k, w in enumerate(table.words):
        m = np.eye(dim)
        for lbl in w:
            m = gates[lbl] @ m
        mats[k] = m
    return np.asarray(rho), np.asarray(eff), mats


def rb_probabilities(model, sequences: Sequence[RBSequence], table: CliffordTable) -> np.ndarray:
    rho, eff, mats = _model_matrices(model, table)
    p = np.empty(len(sequences))
    by_len: dict[int, list[int]] = {}
    for k, s in enumerate(sequences):
        by_len.setdefault(len(s.cliffords), []).append(k)
    for n, idx in by_len.items():
        cl = np.array([sequences[k].cliffords for k in idx])
        v = np.tile(rho, (len(idx), 1))
        for t in range(n):
            v = np.einsum("sij,sj->si", mats[cl[:, t]], v)
        p[idx] = v @ eff
    return p


def rb_run(model, design: RBDesign, shots: int = 100, seed: int = 0, table: CliffordTable | None = None) -> RBTable:
    table = table or build_clifford_table()
    seqs = rb_sequences(design, table)
    raw = rb_probabilities(model, seqs, table)
    excess = float(np.max(np.maximum(raw - 1, 0) + np.maximum(-raw, 0)))
    if excess > 1e-9:
        log.warning("RB probabilities leave [0, 1] by up to %.3g (non-CP model); clipping", excess)
    p = np.clip(raw, 0.0, 1.0)
    counts = np.array(
        [stream(seed, 0, f"rbshot|{s.length}|{s.index}").binomial(shots, p[k]) for k, s in enumerate(seqs)], dtype=float
    )
    return RBTable(
        np.array([len(s.cliffords) for s in seqs]),
        np.array([len(s.gates(table)) for s in seqs]),
        p,
        np.full(len(seqs), float(shots)),
        counts,
        seed,
    )


# -- fitting --------------------------------------------------------------------


def _decay(x, a, b, f):
    return a + b * f**x


@dataclass
class RBFit:
    a: float
    b: float
    f: float
    rate: float
    interval: tuple = (np.nan, np.nan)
    replicates: np.ndarray = field(default_factory=lambda: np.empty(0))
    axis: str = "gates"


def _fit(x, y, p0=None, asymptote=None) -> tuple:
    p0 = p0 or (0.5, max(y.max() - 0.5, 0.1), 0.99)
    if np.ptp(y) <= 1e-12:
        # No observable decay; with A free, f would be unidentifiable (B = 0).
        a = 0.5 if asymptote is None else float(asymptote)
        return (a, float(y[0]) - a, 1.0)
    opts = dict(xtol=1e-15, ftol=1e-15, gtol=1e-15, maxfev=20000)
    if asymptote is None:
        popt, _ = curve_fit(_decay, x, y, p0=p0, bounds=([-1, -2, 0], [2, 2, 1]), **opts)
        return tuple(float(v) for v in popt)
    a = float(asymptote)
    popt, _ = curve_fit(lambda x, b, f: _decay(x, a, b, f), x, y, p0=p0[1:], bounds=([-2, 0], [2, 1]), **opts)
    return (a, float(popt[0]), float(popt[1]))


def fit_decay(
    x: np.ndarray,
    y: np.ndarray,
    groups: np.ndarray | None = None,
    n_boot: int = 200,
    seed: int = 0,
    level: float = 0.95,
    asymptote: float | None = None,
) -> RBFit:
    """Fit ``p = A + B f^x``; rate ``(1 - f)/2``; interval by resampling sequences within each length.

    With `asymptote` given, A is held fixed (1/2 is the fully depolarised
    survival for a balanced two-outcome measurement).  Short decays constrain
    f only through curvature when A is free, so fixing it tightens the
    interval considerably.
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    if x.size < 3:
        raise InputError("need at least three points to fit a decay")
    try:
        a, b, f = _fit(x, y, asymptote=asymptote)
    except RuntimeError as exc:
        raise NumericalError(f"RB decay fit failed: {exc}") from exc
    fit = RBFit(a, b, f, (1 - f) / 2)
    if n_boot:
        groups = x if groups is None else np.asarray(groups)
        rng = stream(seed, 0, "rb-bootstrap")
        idx_by = [np.nonzero(groups == g)[0] for g in np.unique(groups)]
        rates = []
        for _ in range(n_boot):
            pick = np.concatenate([rng.choice(ix, size=ix.size, replace=True) for ix in idx_by])
            try:
                rates.append((1 - _fit(x[pick], y[pick], (a, b, f), asymptote)[2]) / 2)
            except RuntimeError:
                continue
        rates = np.array(rates)
        if rates.size < 0.9 * n_boot:
            raise NumericalError("too many RB bootstrap fits failed")
        q = (1 - level) / 2
        fit.interval = (float(np.quantile(rates, q)), float(np.quantile(rates, 1 - q)))
        fit.replicates = rates
    return fit


def fit_table(tab: RBTable, axis: str = "gates", **kwargs) -> RBFit:
    if axis not in ("gates", "cliffords"):
        raise InputError("axis must be 'gates' or 'cliffords'")
    x = tab.length_gates if axis == "gates" else tab.length_cliffords
    out = fit_decay(x, tab.survival, groups=tab.length_cliffords, **kwargs)
    out.axis = axis
    return out


DEFAULT_RB_LENGTHS = (1, 2, 4, 8, 16, 32, 64, 128, 256, 400, 630)


def predict_rb_rate(
    model,
    design: RBDesign | None = None,
    shots: int = 100,
    seed: int = 0,
    axis: str = "gates",
    n_boot: int = 200,
    asymptote: float | None = None,
) -> RBFit:
    """RB error rate per gate (or per Clifford) predicted by simulating RB on `model`."""
    design = design or RBDesign(lengths=DEFAULT_RB_LENGTHS, n_sequences=30, seed=seed)
    return fit_table(rb_run(model, design, shots, seed), axis, n_boot=n_boot, seed=seed, asymptote=asymptote)
