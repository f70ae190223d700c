"""Exact probabilities and sampled datasets.

Random draws come from a Philox counter-based generator whose key is derived
from ``(seed, replicate, sequence text)``.  Each sequence therefore owns its
own stream, and a dataset does not depend on catalog order or on how the work
is scheduled.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .dataset import DataSet
from .errors import InputError, NumericalError
from .gateset import GateSet, depolarizing, ptm_from_unitary, rotation_unitary
from .sequences import GateSequence, format_sequence

log = logging.getLogger(__name__)

CLIP_ATOL = 1e-9

# Nominal (axis, angle) of the default labels; used to define over-rotation and tilt.
NOMINAL_ROTATIONS = {
    "Gi": ((0.0, 0.0, 1.0), 0.0),
    "Gx": ((1.0, 0.0, 0.0), np.pi / 2),
    "Gy": ((0.0, 1.0, 0.0), np.pi / 2),
}


def _per_gate(value, label: str) -> float:
    if isinstance(value, Mapping):
        return float(value.get(label, 0.0))
    return float(value)


@dataclass(frozen=True)
class NoiseSpec:
    """Per-gate error magnitudes; each field is a float or a ``{label: float}`` map."""

    depolarizing: float | Mapping[str, float] = 0.0
    overrotation: float | Mapping[str, float] = 0.0
    tilt: float | Mapping[str, float] = 0.0


def _tilted_axis(axis, eps: float) -> np.ndarray:
    # Rotate the nominal axis about z by eps: x -> (cos, sin, 0), y -> (-sin, cos, 0).
    c, s = np.cos(eps), np.sin(eps)
    rz = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    return rz @ np.asarray(axis, dtype=float)


def apply_noise(gs: GateSet, noise: NoiseSpec) -> GateSet:
    """``G' = D_p R_extra G`` with ``R_extra`` turning the nominal rotation into the noisy one."""
    gates = {}
    for label, g in gs.gates.items():
        p = _per_gate(noise.depolarizing, label)
        if not 0 <= p <= 1:
            raise InputError(f"depolarizing rate {p} for {label} is outside [0, 1]")
        extra = np.eye(4)
        if label in NOMINAL_ROTATIONS:
            axis, angle = NOMINAL_ROTATIONS[label]
            over = _per_gate(noise.overrotation, label)
            tilt = _per_gate(noise.tilt, label)
            if over or tilt:
                u_nom = rotation_unitary(axis, angle)
                u_new = rotation_unitary(_tilted_axis(axis, tilt), angle + over)
                extra = ptm_from_unitary(u_new @ u_nom.conj().T, atol=1e-10)
        elif _per_gate(noise.overrotation, label) or _per_gate(noise.tilt, label):
            raise InputError(f"no nominal rotation known for gate {label!r}")
        gates[label] = depolarizing(p) @ extra @ g
    return gs.replace(gates=gates)


def _block_product(gates: Mapping[str, np.ndarray], s: GateSequence, dim: int) -> np.ndarray:
    p = np.eye(dim)
    for labels, reps in s.blocks:
        w = np.eye(dim)
        for lbl in labels:
            w = gates[lbl] @ w
        p = np.linalg.matrix_power(w, reps) @ p
    return p


def exact_probabilities(gs: GateSet, sequences: Sequence[GateSequence]) -> np.ndarray:
    from .calculus import CircuitEvaluator

    return CircuitEvaluator(sequences, gs.labels).probabilities(gs)


def clip_probabilities(p: np.ndarray, atol: float = CLIP_ATOL) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    bad = (p < -atol) | (p > 1 + atol)
    if np.any(bad):
        raise NumericalError(f"probability {p[bad][0]:.6g} outside [0, 1] beyond tolerance {atol}")
    return np.clip(p, 0.0, 1.0)


def stream(seed: int, replicate: int, key: str) -> np.random.Generator:
    """Counter-based generator keyed by content, independent of evaluation order."""
    h = hashlib.blake2b(f"{int(seed)}|{int(replicate)}|{key}".encode(), digest_size=16).digest()
    k = np.frombuffer(h, dtype="<u8").copy()
    return np.random.Generator(np.random.Philox(key=k))


def sample_counts(p: np.ndarray, shots, sequences: Sequence[GateSequence], seed: int, replicate: int = 0) -> np.ndarray:
    p = clip_probabilities(p)
    shots = np.broadcast_to(np.asarray(shots, dtype=np.int64), p.shape)
    out = np.empty(p.size)
    for k, s in enumerate(sequences):
        out[k] = stream(seed, replicate, format_sequence(s)).binomial(int(shots[k]), p[k])
    return out


def exact_dataset(gs: GateSet, sequences: Sequence[GateSequence], shots=1) -> DataSet:
    """Infinite-shot data: counts are ``N p`` (not rounded)."""
    sequences = list(sequences)
    p = clip_probabilities(exact_probabilities(gs, sequences))
    shots = np.broadcast_to(np.asarray(shots, dtype=float), p.shape)
    return DataSet(sequences, shots, shots * p)


def simulate_dataset(gs: GateSet, sequences: Sequence[GateSequence], shots, seed: int, replicate: int = 0) -> DataSet:
    sequences = list(sequences)
    if np.any(np.asarray(shots) < 1):
        raise InputError("shots must be >= 1")
    p = exact_probabilities(gs, sequences)
    shots_arr = np.broadcast_to(np.asarray(shots, dtype=float), p.shape)
    return DataSet(sequences, shots_arr, sample_counts(p, shots_arr, sequences, seed, replicate))


# -- composite (toggling) model ---------------------------------------------------


@dataclass(frozen=True)
class CompositeModel:
    """Gate set whose Gx and Gy over-rotate by +theta or -theta depending on a bit q.

    q is drawn uniformly at the start of each shot and flips after every gate,
    idles and fiducial gates included.
    """

    base: GateSet
    theta: float
    toggled: tuple[str, ...] = ("Gx", "Gy")

    def __post_init__(self):
        if not np.isfinite(self.theta):
            raise InputError("theta must be finite")
        if not self.base.is_tp(1e-9):
            raise InputError("composite model base gates must be TP")

    def branch(self, sign: int) -> GateSet:
        gates = {}
        for lbl in self.toggled:
            axis, _ = NOMINAL_ROTATIONS[lbl]
            r = ptm_from_unitary(rotation_unitary(axis, sign * self.theta))
            gates[lbl] = r @ self.base.gates[lbl]
        return self.base.replace(gates=gates)

    def lifted(self) -> tuple[np.ndarray, np.ndarray, dict]:
        """Eight-dimensional Markovian form over (qubit) x (q), blocks ordered (+, -)."""
        plus, minus = self.branch(+1), self.branch(-1)
        gates = {}
        for lbl in self.base.labels:
            g = np.zeros((8, 8))
            g[4:, :4] = plus.gates[lbl]  # q=+1 acts, then q becomes -1
            g[:4, 4:] = minus.gates[lbl]
            gates[lbl] = g
        rho = np.concatenate([self.base.rho, self.base.rho]) / 2
        eff = np.concatenate([self.base.effect, self.base.effect])
        return rho, eff, gates

    @property
    def labels(self) -> tuple[str, ...]:
        return self.base.labels


def composite_probabilities(cm: CompositeModel, sequences: Sequence[GateSequence]) -> np.ndarray:
    rho, eff, gates = cm.lifted()
    return np.array([eff @ _block_product(gates, s, 8) @ rho for s in sequences])


def composite_branch_probabilities(cm: CompositeModel, s: GateSequence) -> tuple[float, float]:
    """Shot-level oracle: follow q explicitly, gate by gate, from q0 = +1 and q0 = -1."""
    branches = {+1: cm.branch(+1), -1: cm.branch(-1)}
    out = []
    for q0 in (+1, -1):
        q, v = q0, np.array(cm.base.rho)
        for lbl in s.labels:
            v = branches[q].gates[lbl] @ v
            q = -q
        out.append(float(cm.base.effect @ v))
    return out[0], out[1]


def simulate_composite(
    cm: CompositeModel,
    sequences: Sequence[GateSequence],
    shots,
    seed: int,
    replicate: int = 0,
    per_shot: bool = False,
) -> DataSet:
    """Sample the composite model.

    By default each count is binomial on the q-averaged probability, which is
    the exact law of independent shots.  ``per_shot=True`` draws q and the
    outcome for every shot explicitly.
    """
    sequences = list(sequences)
    shots_arr = np.broadcast_to(np.asarray(shots, dtype=float), (len(sequences),))
    if not per_shot:
        p = composite_probabilities(cm, sequences)
        return DataSet(sequences, shots_arr, sample_counts(p, shots_arr, sequences, seed, replicate))
    rho, eff, gates = cm.lifted()
    counts = np.empty(len(sequences))
    for k, s in enumerate(sequences):
        prod = _block_product(gates, s, 8)
        p_branch = clip_probabilities(np.array([eff @ prod[:, :4] @ cm.base.rho, eff @ prod[:, 4:] @ cm.base.rho]))
        rng = stream(seed, replicate, "shot|" + format_sequence(s))
        n = int(shots_arr[k])
        q = rng.integers(0, 2, size=n)
        counts[k] = np.sum(rng.random(n) < p_branch[q])
    return DataSet(sequences, shots_arr, counts)
