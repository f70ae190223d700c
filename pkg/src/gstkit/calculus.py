"""Probabilities of many gate sequences and their first and second derivatives.

Free parameters of a TP gate set, in order:

* for each gate (label order) the 12 entries of rows 1..3, row-major;
* ``rho[1:4]`` (``rho[0]`` is pinned to 1/sqrt(2));
* all four entries of the effect.

Each sequence is split into blocks ``(labels, reps)``.  Block products and
their derivatives are memoized and raised to powers by repeated squaring, so a
germ power of length 8192 costs a handful of 4x4 products.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .gateset import SQRT2, GateSet
from .errors import InputError
from .sequences import GateSequence

GATE_PARAMS = 12


def n_params(n_gates: int) -> int:
    return GATE_PARAMS * n_gates + 7


def gateset_to_vector(gs: GateSet) -> np.ndarray:
    parts = [g[1:].ravel() for g in gs.gates.values()]
    parts += [gs.rho[1:], gs.effect]
    return np.concatenate(parts)


def vector_to_gateset(x: np.ndarray, labels: Sequence[str]) -> GateSet:
    x = np.asarray(x, dtype=float)
    ng = len(labels)
    if x.shape != (n_params(ng),):
        raise InputError(f"parameter vector has length {x.shape}, expected {n_params(ng)}")
    gates = {}
    for k, lbl in enumerate(labels):
        g = np.zeros((4, 4))
        g[0, 0] = 1.0
        g[1:] = x[GATE_PARAMS * k: GATE_PARAMS * (k + 1)].reshape(3, 4)
        gates[lbl] = g
    o = GATE_PARAMS * ng
    rho = np.concatenate([[1 / SQRT2], x[o: o + 3]])
    return GateSet(rho, x[o + 3: o + 7], gates)


def _combine(a, b, order: int):
    """Derivatives of ``Pb @ Pa`` (a acts first)."""
    pa, pb = a[0], b[0]
    p = pb @ pa
    if order == 0:
        return (p,)
    da, db = a[1], b[1]
    dp = np.einsum("ikp,kj->ijp", db, pa) + np.einsum("ik,kjp->ijp", pb, da)
    if order == 1:
        return p, dp
    cross = np.einsum("ikp,kjq->ijpq", db, da)
    d2 = (
        np.einsum("ikpq,kj->ijpq", b[2], pa)
        + np.einsum("ik,kjpq->ijpq", pb, a[2])
        + cross
        + cross.transpose(0, 1, 3, 2)
    )
    return p, dp, d2


class CircuitEvaluator:
    """Evaluates a fixed list of sequences against varying gate-set parameters."""

    def __init__(self, sequences: Sequence[GateSequence], labels: Sequence[str]):
        self.labels = tuple(labels)
        self.sequences = list(sequences)
        self.ng = len(self.labels)
        self.nparams = n_params(self.ng)
        self._label_index = {lbl: k for k, lbl in enumerate(self.labels)}
        blocks: dict[tuple, int] = {(): 0}
        rows = []
        for s in self.sequences:
            for lbl in s.labels:
                if lbl not in self._label_index:
                    raise InputError(f"sequence {s} uses unknown gate label {lbl!r}")
            rows.append([blocks.setdefault(b, len(blocks)) for b in s.blocks])
        self.blocks = list(blocks)
        width = max([len(r) for r in rows] + [1])
        # Block index table padded with the identity block 0.
        self.table = np.zeros((len(rows), width), dtype=int)
        for i, r in enumerate(rows):
            self.table[i, : len(r)] = r
        self._cache_key = None
        self._cache = None

    def __len__(self) -> int:
        return len(self.sequences)

    # -- block algebra --------------------------------------------------------

    def _gate_terms(self, gs: GateSet, order: int):
        ngp = GATE_PARAMS * self.ng
        out = {}
        for k, lbl in enumerate(self.labels):
            terms = [np.asarray(gs.gates[lbl])]
            if order >= 1:
                d = np.zeros((4, 4, ngp))
                for r in range(3):
                    for c in range(4):
                        d[r + 1, c, GATE_PARAMS * k + 4 * r + c] = 1.0
                terms.append(d)
            if order >= 2:
                terms.append(np.zeros((4, 4, ngp, ngp)))
            out[lbl] = tuple(terms)
        return out

    def _block_terms(self, gs: GateSet, order: int):
        """List of (P, dP, d2P) per block, truncated to `order`."""
        key = (b"".join(np.asarray(gs.gates[lbl]).tobytes() for lbl in self.labels), order)
        if self._cache_key == key:
            return self._cache
        ngp = GATE_PARAMS * self.ng
        ident = [np.eye(4), np.zeros((4, 4, ngp)), np.zeros((4, 4, ngp, ngp))][: order + 1]
        gate = self._gate_terms(gs, order)
        words: dict[tuple, tuple] = {}
        powers: dict[tuple, tuple] = {}

        def word(labels):
            if labels not in words:
                acc = tuple(ident)
                for lbl in labels:
                    acc = _combine(acc, gate[lbl], order)
                words[labels] = acc
            return words[labels]

        def power(labels, r):
            if (labels, r) in powers:
                return powers[(labels, r)]
            if r == 1:
                res = word(labels)
            else:
                half = power(labels, r // 2)
                res = _combine(half, half, order)
                if r % 2:
                    res = _combine(res, word(labels), order)
            powers[(labels, r)] = res
            return res

        terms = [tuple(ident)]
        for labels, r in self.blocks[1:]:
            terms.append(power(labels, r))
        stacked = tuple(np.array([t[i] for t in terms]) for i in range(order + 1))
        self._cache_key, self._cache = key, stacked
        return stacked

    def _vectors(self, gs: GateSet, P):
        """Left state vectors before each block and right effect rows after it."""
        S, m = self.table.shape
        left = np.empty((m + 1, S, 4))
        left[0] = gs.rho
        for t in range(m):
            left[t + 1] = np.einsum("sij,sj->si", P[self.table[:, t]], left[t])
        right = np.empty((m + 1, S, 4))
        right[m] = gs.effect
        for t in range(m - 1, -1, -1):
            right[t] = np.einsum("si,sij->sj", right[t + 1], P[self.table[:, t]])
        return left, right

    # -- public API -----------------------------------------------------------

    def probabilities(self, gs: GateSet) -> np.ndarray:
        (P,) = self._block_terms(gs, 0)[:1]
        left, _ = self._vectors(gs, P)
        return left[-1] @ gs.effect

    def jacobian(self, gs: GateSet) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(p, dp/dx)`` with shape ``(S,)`` and ``(S, nparams)``."""
        P, dP = self._block_terms(gs, 1)
        left, right = self._vectors(gs, P)
        S, m = self.table.shape
        ngp = GATE_PARAMS * self.ng
        jac = np.zeros((S, self.nparams))
        for t in range(m):
            jac[:, :ngp] += np.einsum("si,sijp,sj->sp", right[t + 1], dP[self.table[:, t]], left[t])
        # rho[0] is fixed; d p / d rho[1:] is the full product's effect row.
        jac[:, ngp: ngp + 3] = right[0][:, 1:]
        jac[:, ngp + 3:] = left[m]
        return left[m] @ gs.effect, jac

    def weighted_hessian(self, gs: GateSet, w: np.ndarray) -> np.ndarray:
        """``sum_s w_s d^2 p_s / dx dx`` as an ``(nparams, nparams)`` matrix."""
        w = np.asarray(w, dtype=float)
        P, dP, d2P = self._block_terms(gs, 2)
        left, right = self._vectors(gs, P)
        S, m = self.table.shape
        ngp = GATE_PARAMS * self.ng
        H = np.zeros((self.nparams, self.nparams))
        gg = np.zeros((ngp, ngp))
        nb = len(self.blocks)
        for t in range(m):
            outer = np.zeros((nb, 4, 4))
            np.add.at(outer, self.table[:, t], w[:, None, None] * right[t + 1][:, :, None] * left[t][:, None, :])
            gg += np.einsum("uij,uijpq->pq", outer, d2P)
        # Cross terms between distinct blocks t < u (t acts first).
        for t in range(m):
            bt = np.einsum("sijq,sj->siq", dP[self.table[:, t]], left[t])
            mid = np.broadcast_to(np.eye(4), (S, 4, 4)).copy()
            for u in range(t + 1, m):
                au = np.einsum("si,sijp->sjp", right[u + 1], dP[self.table[:, u]])
                c = np.einsum("s,sjp,sjk,skq->pq", w, au, mid, bt)
                gg += c + c.T
                mid = np.einsum("sij,sjk->sik", P[self.table[:, u]], mid)
        H[:ngp, :ngp] = gg
        # SPAM/gate terms: left[t] = Prefix_t rho and right[t+1] = E Suffix_{t+1}.
        pre = np.broadcast_to(np.eye(4), (S, 4, 4)).copy()
        suf_all = [None] * (m + 1)
        suf = np.broadcast_to(np.eye(4), (S, 4, 4)).copy()
        suf_all[m] = suf
        for t in range(m - 1, -1, -1):
            suf = np.einsum("sij,sjk->sik", suf, P[self.table[:, t]])
            suf_all[t] = suf
        for t in range(m):
            dPt = dP[self.table[:, t]]
            # rho block: sum_s w_s right[t+1] dP_t Prefix_t[:, a]
            r_part = np.einsum("s,si,sijp,sja->ap", w, right[t + 1], dPt, pre)
            H[ngp: ngp + 3, :ngp] += r_part[1:]
            # effect block: sum_s w_s Suffix_{t+1}[b, :] dP_t left[t]
            e_part = np.einsum("s,sbi,sijp,sj->bp", w, suf_all[t + 1], dPt, left[t])
            H[ngp + 3:, :ngp] += e_part
            pre = np.einsum("sij,sjk->sik", P[self.table[:, t]], pre)
        # rho/effect: d^2 p / dE_b drho_a = Ptot[b, a]
        H[ngp + 3:, ngp: ngp + 3] = np.einsum("s,sba->ba", w, suf_all[0])[:, 1:]
        # SPAM rows were filled below the diagonal; mirror them.
        H[:ngp, ngp:] = H[ngp:, :ngp].T
        H[ngp: ngp + 3, ngp + 3:] = H[ngp + 3:, ngp: ngp + 3].T
        return H
