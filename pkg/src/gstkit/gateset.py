"""Single-qubit gate sets in the normalized Pauli basis.

Every object lives in the Hilbert-Schmidt space spanned by
``B_a = sigma_a / sqrt(2)`` for ``a`` in (I, X, Y, Z).  A density matrix is the
real 4-vector ``v_a = Tr(B_a rho)``; a gate is the real 4x4 matrix
``m_ab = Tr(B_a G(B_b))``.  Trace preservation is then the statement that the
first row of ``m`` is ``(1, 0, 0, 0)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping

import numpy as np
import scipy.linalg

from .errors import CPTruncationError, InputError, NumericalError
from .sequences import GateSequence

log = logging.getLogger(__name__)

SQRT2 = np.sqrt(2.0)
PAULIS = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
BASIS = PAULIS / SQRT2
# Choi basis: CHOI_BASIS[a, b] = B_a (x) B_b^T, orthonormal under Tr(X^dag Y).
CHOI_BASIS = np.einsum("aij,bkl->abikjl", BASIS, BASIS.transpose(0, 2, 1)).reshape(4, 4, 4, 4)

TP_ATOL = 1e-12
CP_ATOL = 1e-10


def density_to_vec(rho: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("aji,ij->a", BASIS, rho))


def vec_to_density(v: np.ndarray) -> np.ndarray:
    return np.einsum("a,aij->ij", np.asarray(v, dtype=float), BASIS)


def ptm_from_unitary(u: np.ndarray, atol: float = 1e-12) -> np.ndarray:
    """Superoperator of ``rho -> u rho u^dag``."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise InputError(f"expected a 2x2 unitary, got shape {u.shape}")
    dev = np.abs(u.conj().T @ u - np.eye(2)).max()
    if dev > atol:
        raise InputError(f"matrix is not unitary: max |u^dag u - 1| = {dev:.3e}")
    m = np.einsum("aij,jk,bkl,il->ab", BASIS, u, BASIS, u.conj())
    return np.real(m)


def rotation_unitary(axis, angle: float) -> np.ndarray:
    """``exp(-i angle/2 n.sigma)`` for a unit axis ``n``."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    return np.cos(angle / 2) * np.eye(2) - 1j * np.sin(angle / 2) * np.einsum("a,aij->ij", n, PAULIS[1:])


def depolarizing(p: float) -> np.ndarray:
    return np.diag([1.0, 1 - p, 1 - p, 1 - p])


def choi_from_superop(m: np.ndarray) -> np.ndarray:
    """Choi matrix ``sum_ab m_ab B_a (x) B_b^T`` (output (x) input, trace 2 when TP)."""
    return np.einsum("ab,abij->ij", np.asarray(m, dtype=float), CHOI_BASIS)


def superop_from_choi(j: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("abji,ij->ab", CHOI_BASIS, j))


def min_choi_eigenvalue(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(choi_from_superop(m))[0])


def is_tp(m: np.ndarray, atol: float = TP_ATOL) -> bool:
    return bool(np.abs(m[0] - np.array([1.0, 0, 0, 0])).max() <= atol)


def is_cp(m: np.ndarray, atol: float = CP_ATOL) -> bool:
    return min_choi_eigenvalue(m) >= -atol


@dataclass(frozen=True, eq=False)
class GateSet:
    """Immutable gate set ``{rho, E, G_k}``.

    ``effect`` is the dual vector of the "bright" outcome, so a sequence has
    probability ``effect @ product @ rho``.
    """

    rho: np.ndarray
    effect: np.ndarray
    gates: Mapping[str, np.ndarray]

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float).reshape(4)
        effect = np.array(self.effect, dtype=float).reshape(4)
        if not self.gates:
            raise InputError("a gate set needs at least one gate")
        gates = {}
        for label, g in self.gates.items():
            if not label.startswith("G"):
                raise InputError(f"gate label {label!r} must start with 'G'")
            g = np.array(g, dtype=float)
            if g.shape != (4, 4):
                raise InputError(f"gate {label} has shape {g.shape}, expected (4, 4)")
            if not np.all(np.isfinite(g)):
                raise InputError(f"gate {label} has non-finite entries")
            g.setflags(write=False)
            gates[label] = g
        for a in (rho, effect):
            if not np.all(np.isfinite(a)):
                raise InputError("state and effect must be finite")
            a.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "effect", effect)
        object.__setattr__(self, "gates", gates)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.gates)

    def replace(self, rho=None, effect=None, gates=None) -> "GateSet":
        return GateSet(
            self.rho if rho is None else rho,
            self.effect if effect is None else effect,
            {**self.gates, **(gates or {})},
        )

    def is_tp(self, atol: float = TP_ATOL) -> bool:
        return all(is_tp(g, atol) for g in self.gates.values())

    def allclose(self, other: "GateSet", atol: float = 1e-12) -> bool:
        if self.labels != other.labels:
            return False
        arrays = [(self.rho, other.rho), (self.effect, other.effect)]
        arrays += [(self.gates[k], other.gates[k]) for k in self.labels]
        return all(np.abs(a - b).max() <= atol for a, b in arrays)

    def max_abs_diff(self, other: "GateSet") -> float:
        d = [np.abs(self.rho - other.rho).max(), np.abs(self.effect - other.effect).max()]
        d += [np.abs(self.gates[k] - other.gates[k]).max() for k in self.labels]
        return float(max(d))


def ideal_gateset() -> GateSet:
    """|0> preparation, |1> ("bright") effect, and Gi, Gx = X(pi/2), Gy = Y(pi/2)."""
    rho = np.array([1.0, 0, 0, 1.0]) / SQRT2
    effect = np.array([1.0, 0, 0, -1.0]) / SQRT2
    gates = {
        "Gi": np.eye(4),
        "Gx": ptm_from_unitary(rotation_unitary([1, 0, 0], np.pi / 2)),
        "Gy": ptm_from_unitary(rotation_unitary([0, 1, 0], np.pi / 2)),
    }
    # Remove roundoff so that ideal products are exact.
    gates = {k: np.round(v, 15) for k, v in gates.items()}
    return GateSet(rho, effect, gates)


def _resolve(gs: GateSet, label: str) -> np.ndarray:
    try:
        return gs.gates[label]
    except KeyError:
        raise InputError(f"unknown gate label {label!r} (gate set has {', '.join(gs.labels)})") from None


def sequence_product(gs: GateSet, s: GateSequence, initial: np.ndarray | None = None) -> np.ndarray:
    """Product ``G_n ... G_1`` as a strict left fold over the time-ordered labels."""
    p = np.eye(4) if initial is None else np.array(initial, dtype=float)
    for label in s.labels:
        p = _resolve(gs, label) @ p
    return p


def raw_probability(gs: GateSet, s: GateSequence) -> float:
    return float(gs.effect @ (sequence_product(gs, s) @ gs.rho))


def outcome_probability(gs: GateSet, s: GateSequence, raw: bool = False) -> float:
    p = raw_probability(gs, s)
    if raw:
        return p
    if p < -1e-9 or p > 1 + 1e-9:
        log.warning("probability %.3e of %s outside [0, 1]; clipped for reporting", p, s)
    return min(max(p, 0.0), 1.0)


def truncate_to_cp(m: np.ndarray, max_rounds: int = 200, tol: float = 1e-12) -> np.ndarray:
    """Alternate between clipping negative Choi eigenvalues and resetting the TP row."""
    m = np.asarray(m, dtype=float)
    if not is_tp(m, 1e-9):
        raise InputError("truncate_to_cp expects a trace-preserving superoperator")
    if min_choi_eigenvalue(m) >= -CP_ATOL:
        return m
    cur = m.copy()
    resid = np.inf
    for _ in range(max_rounds):
        w, v = np.linalg.eigh(choi_from_superop(cur))
        cur = superop_from_choi((v * np.clip(w, 0, None)) @ v.conj().T)
        tp_dev = np.abs(cur[0] - [1, 0, 0, 0]).max()
        cur[0] = [1.0, 0, 0, 0]
        resid = max(tp_dev, -min_choi_eigenvalue(cur), 0.0)
        if resid < tol:
            return cur
    if -min_choi_eigenvalue(cur) <= CP_ATOL:
        return cur
    raise CPTruncationError("CP truncation did not converge", cur, resid)


def project_state(v: np.ndarray) -> np.ndarray:
    """Nearest unit-trace positive state (eigenvalue clipping)."""
    w, u = np.linalg.eigh(vec_to_density(v))
    w = np.clip(w, 0, None)
    w = w / w.sum()
    return density_to_vec((u * w) @ u.conj().T)


def project_effect(e: np.ndarray) -> np.ndarray:
    """Clip the effect's eigenvalues into [0, 1]."""
    w, u = np.linalg.eigh(vec_to_density(e))
    return density_to_vec((u * np.clip(w, 0, 1)) @ u.conj().T)


def truncate_gateset_to_cp(gs: GateSet) -> GateSet:
    gates = {k: truncate_to_cp(g) for k, g in gs.gates.items()}
    rho = project_state(gs.rho)
    rho[0] = 1 / SQRT2
    return GateSet(rho, project_effect(gs.effect), gates)


def error_generator(g_hat: np.ndarray, g_target: np.ndarray) -> np.ndarray:
    """Principal logarithm of ``G0^-1 G_hat``."""
    g_target = np.asarray(g_target, dtype=float)
    if np.linalg.cond(g_target) > 1e12:
        raise NumericalError("target gate is singular; cannot form G0^-1 G")
    x = np.linalg.solve(g_target, np.asarray(g_hat, dtype=float))
    ev = np.linalg.eigvals(x)
    if np.any((ev.real <= 0) & (np.abs(ev.imag) < 1e-10)):
        raise NumericalError(
            "G0^-1 G has an eigenvalue on the negative real axis; inspect the gauge before taking logs"
        )
    lg = scipy.linalg.logm(x)
    if np.abs(lg.imag).max() > 1e-10:
        raise NumericalError("matrix logarithm is not real; inspect the gauge")
    return np.real(lg)
