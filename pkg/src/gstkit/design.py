"""Experiment design: fiducials, germs, the sequence catalog, and germ selection."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError, NumericalError
from .gateset import GateSet, raw_probability, sequence_product
from .sequences import EMPTY, GateSequence, Provenance, format_sequence, germ_power, parse_sequence, seq

log = logging.getLogger(__name__)

RANK_RTOL = 1e-6


@dataclass(frozen=True)
class FiducialSet:
    prep: tuple[GateSequence, ...]
    meas: tuple[GateSequence, ...]


def default_fiducials() -> FiducialSet:
    f = tuple(parse_sequence(t) for t in ["{}", "Gx", "Gy", "GxGx", "GxGxGx", "GyGyGy"])
    return FiducialSet(f, f)


DEFAULT_GERMS = (
    "Gx", "Gy", "Gi", "GxGy",
    "GxGyGi", "GxGiGy", "GxGiGi", "GyGiGi",
    "GxGxGiGy", "GxGyGyGi", "GxGxGyGxGyGy",
)


def default_germs() -> tuple[GateSequence, ...]:
    return tuple(parse_sequence(t) for t in DEFAULT_GERMS)


def default_schedule(max_length: int = 8192) -> tuple[int, ...]:
    if max_length < 1:
        raise InputError("maximum length must be >= 1")
    out, L = [], 1
    while L <= max_length:
        out.append(L)
        L *= 2
    return tuple(out)


def _sandwich(prep: GateSequence, op: GateSequence, meas: GateSequence, prov: Provenance) -> GateSequence:
    # Time order: preparation fiducial, operation, measurement fiducial.
    return GateSequence.from_blocks(prep.blocks + op.blocks + meas.blocks, prov)


@dataclass
class SequenceCatalog:
    """Ordered, duplicate-free list of sequences with provenance."""

    sequences: list[GateSequence]
    fiducials: FiducialSet | None = None
    germs: tuple[GateSequence, ...] = ()
    schedule: tuple[int, ...] = ()
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index = {s: k for k, s in enumerate(self.sequences)}
        if len(self._index) != len(self.sequences):
            raise InputError("catalog contains duplicate sequences")

    def __len__(self) -> int:
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    def __contains__(self, s) -> bool:
        return s in self._index

    def index(self, s: GateSequence) -> int:
        return self._index[s]

    def up_to(self, L: int) -> list[GateSequence]:
        """Sequences whose provenance base length is <= L (unknown provenance always included)."""
        return [s for s in self.sequences if s.provenance is None or s.provenance.length <= L]


def build_catalog(
    fiducials: FiducialSet | None = None,
    germs: Sequence[GateSequence] | None = None,
    schedule: Sequence[int] | None = None,
    gate_labels: Sequence[str] = ("Gi", "Gx", "Gy"),
) -> SequenceCatalog:
    """All ``F_j germ^r F_i`` with ``r = floor(L/|germ|) >= 1``, plus the LGST sequences.

    Sequences are deduplicated on their flattened labels; a duplicate keeps the
    provenance of its first occurrence, which is the one with smallest L
    because lengths are visited in ascending order after the LGST block.
    """
    fiducials = fiducials or default_fiducials()
    germs = tuple(germs) if germs is not None else default_germs()
    schedule = tuple(schedule) if schedule is not None else default_schedule()
    if any(b <= a for a, b in zip(schedule, schedule[1:])) or any(L < 1 for L in schedule):
        raise InputError("length schedule must be strictly increasing positive integers")
    if len(set(germs)) != len(germs):
        raise InputError("duplicate germs")
    if any(len(g) == 0 for g in germs):
        raise InputError("germs must be nonempty")
    germ_labels = {g.labels for g in germs}
    out: dict[GateSequence, GateSequence] = {}

    def add(s: GateSequence):
        if s not in out:
            out[s] = s

    for i, fi in enumerate(fiducials.prep):
        for j, fj in enumerate(fiducials.meas):
            add(_sandwich(fi, EMPTY, fj, Provenance(None, 0, i, j)))
    for lbl in gate_labels:
        g = seq(lbl)
        prov_germ = g.labels if g.labels in germ_labels else None
        for i, fi in enumerate(fiducials.prep):
            for j, fj in enumerate(fiducials.meas):
                prov = Provenance(prov_germ, 1 if prov_germ else 0, i, j)
                add(_sandwich(fi, g, fj, prov))
    for L in schedule:
        for g in germs:
            r = L // len(g)
            if r < 1:
                continue
            op = germ_power(g, r)
            for i, fi in enumerate(fiducials.prep):
                for j, fj in enumerate(fiducials.meas):
                    add(_sandwich(fi, op, fj, Provenance(g.labels, L, i, j)))
    return SequenceCatalog(list(out.values()), fiducials, germs, schedule)


def lgst_sequences(fiducials: FiducialSet, labels: Sequence[str]) -> tuple[list, dict]:
    """``F_j F_i`` (6x6) and ``F_j G_k F_i`` per label, as (pairs, {label: 6x6 list})."""
    def grid(op):
        return [[_sandwich(fi, op, fj, None) for fi in fiducials.prep] for fj in fiducials.meas]

    return grid(EMPTY), {lbl: grid(seq(lbl)) for lbl in labels}


def assign_provenance(sequences: Iterable[GateSequence], catalog: SequenceCatalog) -> list[GateSequence]:
    """Attach the catalog's provenance (and block structure) to matching sequences."""
    out = []
    for s in sequences:
        if s in catalog:
            out.append(catalog.sequences[catalog.index(s)])
        else:
            out.append(s)
    return out


# -- Gram matrix ---------------------------------------------------------------


def gram_matrix(gs: GateSet, fiducials: FiducialSet | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Entry ``(j, i)`` is the probability of ``F_i`` then ``F_j``."""
    fiducials = fiducials or default_fiducials()
    states = np.array([sequence_product(gs, f) @ gs.rho for f in fiducials.prep])
    effects = np.array([gs.effect @ sequence_product(gs, f) for f in fiducials.meas])
    g = effects @ states.T
    return g, np.linalg.svd(g, compute_uv=False)


def numerical_rank(sv: np.ndarray, rtol: float = RANK_RTOL) -> int:
    sv = np.asarray(sv)
    if sv.size == 0 or sv.max() == 0:
        return 0
    return int(np.sum(sv > rtol * sv.max()))


# -- germ Jacobians and gauge ---------------------------------------------------


def germ_derivative(gs: GateSet, germ: GateSequence) -> tuple[np.ndarray, np.ndarray]:
    """``sigma(germ)`` and its derivative w.r.t. the free TP entries, shape (4, 4, 12 n_gates)."""
    labels = gs.labels
    ng = len(labels)
    mats = [gs.gates[l] for l in germ.labels]
    n = len(mats)
    prefix = [np.eye(4)]
    for m in mats:
        prefix.append(m @ prefix[-1])
    suffix = [np.eye(4)] * (n + 1)
    for t in range(n - 1, -1, -1):
        suffix[t] = suffix[t + 1] @ mats[t]
    d = np.zeros((4, 4, 12 * ng))
    for t, lbl in enumerate(germ.labels):
        k = labels.index(lbl)
        after, before = suffix[t + 1], prefix[t]
        for r in range(3):
            for c in range(4):
                d[:, :, 12 * k + 4 * r + c] += np.outer(after[:, r + 1], before[c])
    return prefix[-1], d


def commutant_projector(sigma: np.ndarray, atol: float = 1e-9) -> np.ndarray:
    """Orthogonal projector (16x16, row-major vec) onto matrices commuting with `sigma`."""
    if np.abs(sigma @ sigma.T - np.eye(4)).max() > atol:
        raise InputError("germ product is not unitary (orthogonal); twirling assumes reversible gates")
    conj = np.kron(sigma, sigma)
    _, s, vt = np.linalg.svd(conj - np.eye(16))
    null = vt[s < 1e-8]
    return null.T @ null


def twirled_germ_jacobian(gs: GateSet, germ: GateSequence) -> np.ndarray:
    """Long-sequence limit of the germ-power Jacobian: 12 x (12 n_gates)."""
    sigma, d = germ_derivative(gs, germ)
    proj = commutant_projector(sigma)
    flat = proj @ d.reshape(16, -1)
    return flat.reshape(4, 4, -1)[1:].reshape(12, -1)


def finite_germ_jacobian(gs: GateSet, germ: GateSequence, L: int) -> np.ndarray:
    """``(1/L) d[sigma^L]/dG`` by the product rule (brute force, for checking)."""
    sigma, d = germ_derivative(gs, germ)
    powers = [np.linalg.matrix_power(sigma, n) for n in range(L)]
    acc = np.zeros_like(d)
    for n in range(L):
        acc += np.einsum("ij,jkp,kl->ilp", powers[n], d, powers[L - 1 - n])
    return (acc / L)[1:].reshape(12, -1)


@dataclass(frozen=True)
class GaugeBasis:
    """Gauge tangent directions at a gate set.

    ``generators`` holds one tangent column per TP gauge generator (12 of
    them); ``basis`` is an orthonormal basis of their span, whose dimension is
    the numerical rank.  Generators that commute with every gate and fix the
    SPAM produce no tangent, so the rank can be lower than 12.
    """

    generators: np.ndarray
    basis: np.ndarray
    complement: np.ndarray

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def n_generators(self) -> int:
        return self.generators.shape[1]


def gauge_generators(gs: GateSet, include_spam: bool = False, weights: np.ndarray | None = None) -> np.ndarray:
    """Tangent vectors ``d/dt`` of the gauge action for each TP generator ``T = e_a e_b^T``, a >= 1."""
    cols = []
    for a in range(1, 4):
        for b in range(4):
            t = np.zeros((4, 4))
            t[a, b] = 1.0
            parts = [(t @ g - g @ t)[1:].ravel() for g in gs.gates.values()]
            if include_spam:
                parts += [(t @ gs.rho)[1:], -(gs.effect @ t)]
            cols.append(np.concatenate(parts))
    return np.array(cols).T


def gauge_tangent_basis(gs: GateSet, include_spam: bool = False, rtol: float = RANK_RTOL) -> GaugeBasis:
    gen = gauge_generators(gs, include_spam)
    u, s, _ = np.linalg.svd(gen, full_matrices=True)
    r = numerical_rank(s, rtol)
    return GaugeBasis(gen, u[:, :r], u[:, r:])


def stacked_jacobian(gs: GateSet, germs: Sequence[GateSequence]) -> np.ndarray:
    if not germs:
        return np.zeros((0, 12 * len(gs.labels)))
    return np.vstack([twirled_germ_jacobian(gs, g) for g in germs])


@dataclass(frozen=True)
class ACResult:
    complete: bool
    rank: int
    dimension: int
    singular_values: np.ndarray  # sorted descending, on the non-gauge complement
    all_singular_values: np.ndarray  # of the full stacked Jacobian, padded to its column count


def amplificationally_complete(j: np.ndarray, gauge: GaugeBasis, rtol: float = RANK_RTOL) -> ACResult:
    comp = gauge.complement
    ncols = comp.shape[0]
    full = np.zeros(ncols)
    if j.shape[0] == 0:
        return ACResult(False, 0, comp.shape[1], np.zeros(comp.shape[1]), full)
    sv = np.linalg.svd(j @ comp, compute_uv=False)
    sv = np.concatenate([sv, np.zeros(max(0, comp.shape[1] - sv.size))])
    sv_all = np.linalg.svd(j, compute_uv=False)
    full[: min(ncols, sv_all.size)] = sv_all[:ncols]
    # The non-gauge threshold is relative to the largest amplified direction.
    scale = sv.max() if sv.size else 0.0
    rank = int(np.sum(sv > rtol * scale)) if scale > 0 else 0
    return ACResult(rank == comp.shape[1], rank, comp.shape[1], sv, full)


def germ_score(j: np.ndarray, gauge: GaugeBasis, k: int | None = None) -> float:
    """Mean squared error proxy ``Tr[(J_k^T J_k)^-1]`` on the non-gauge complement; +inf when not AC.

    ``J_k = J / sqrt(k)`` is the Jacobian when a fixed number of counts is
    spread evenly over the k germs, so the score equals ``k Tr[(J^T J)^-1]``.
    """
    if k is None:
        k = j.shape[0] // 12
    if k == 0:
        return float("inf")
    ac = amplificationally_complete(j, gauge)
    if not ac.complete:
        return float("inf")
    return float(k * np.sum(1.0 / ac.singular_values**2))


def candidate_germs(labels: Sequence[str] = ("Gi", "Gx", "Gy"), max_length: int = 6) -> list[GateSequence]:
    """All words up to `max_length`, one representative per cyclic class, excluding proper powers."""
    seen: set[tuple[str, ...]] = set()
    out = []
    for n in range(1, max_length + 1):
        for w in itertools.product(sorted(labels), repeat=n):
            if any(n % d == 0 and w == w[:d] * (n // d) for d in range(1, n)):
                continue
            rots = [w[i:] + w[:i] for i in range(n)]
            rep = min(rots)
            if rep in seen:
                continue
            seen.add(rep)
            out.append(GateSequence(rep))
    return out


@dataclass
class GermSearchResult:
    germs: tuple[GateSequence, ...]
    score: float
    trace: list[float]


def select_germs(
    candidates: Sequence[GateSequence],
    gs: GateSet,
    seed: int = 0,
    initial: Sequence[GateSequence] | None = None,
    max_moves: int = 10_000,
) -> GermSearchResult:
    """Greedy add/remove search that keeps a move only when it lowers the score.

    The search first adds germs until the set is AC (maximising the rank of the
    non-gauge Jacobian), then repeatedly applies the single add or remove move
    with the lowest score until none improves.  Ties go to the lexicographically
    smallest germ string; the seed only fixes the evaluation order.
    """
    candidates = list(dict.fromkeys(candidates))
    if not candidates:
        raise InputError("no candidate germs")
    gauge = gauge_tangent_basis(gs)
    jac = {g: twirled_germ_jacobian(gs, g) for g in candidates}
    rng = np.random.default_rng(seed)
    order = [candidates[i] for i in rng.permutation(len(candidates))]

    def stack(s):
        return np.vstack([jac[g] for g in s]) if s else np.zeros((0, gauge.generators.shape[0]))

    def score(s):
        return germ_score(stack(s), gauge, len(s))

    def key(g):
        return format_sequence(g)

    current = list(dict.fromkeys(initial or []))
    ac = amplificationally_complete(stack(current), gauge)
    while not ac.complete:
        best = None
        for g in order:
            if g in current:
                continue
            trial = amplificationally_complete(stack(current + [g]), gauge)
            # Rank first, then a regularised score so that partial sets compare.
            reg = float(np.sum(1.0 / (trial.singular_values**2 + 1e-6)))
            cand = (-trial.rank, reg, key(g))
            if best is None or cand < best[0]:
                best = (cand, g, trial)
        if best is None or best[2].rank <= ac.rank:
            missing = ac.dimension - ac.rank
            raise NumericalError(
                f"no amplificationally complete subset: {missing} non-gauge direction(s) not amplified"
            )
        current.append(best[1])
        ac = best[2]
    cur_score = score(current)
    trace = [cur_score]
    for _ in range(max_moves):
        best = None
        moves = [("add", g) for g in order if g not in current] + [("remove", g) for g in current]
        for kind, g in moves:
            trial = current + [g] if kind == "add" else [h for h in current if h != g]
            sc = score(trial)
            cand = (sc, key(g), kind)
            if best is None or cand < best[0]:
                best = (cand, trial)
        if best is None or not best[0][0] < cur_score:
            break
        current, cur_score = best[1], best[0][0]
        trace.append(cur_score)
        log.debug("germ search: %s -> score %.6g", best[0][2], cur_score)
    return GermSearchResult(tuple(current), cur_score, trace)
