import numpy as np
import pytest
import scipy.linalg

from gstkit.gateset import ideal_gateset, ptm_from_unitary
from gstkit.gateset import GateSet


def random_unitary(rng, scale=1.0):
    h = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    h = (h + h.conj().T) / 2
    return scipy.linalg.expm(-1j * scale * h)


def random_tp(rng, scale=1.0):
    """Random TP superoperator (not necessarily CP)."""
    m = np.eye(4) + scale * rng.normal(size=(4, 4))
    m[0] = [1, 0, 0, 0]
    return m


def near_target(rng, scale=1e-2, target=None):
    """Random CPTP gate set near the target: small unitary kicks, depolarizing, and SPAM error."""
    target = target or ideal_gateset()
    gates = {}
    for k, g in target.gates.items():
        d = np.diag([1.0] + list(1 - scale * rng.uniform(0.1, 1, size=3)))
        m = d @ ptm_from_unitary(random_unitary(rng, scale)) @ g
        m[0] = [1, 0, 0, 0]  # exact TP row, free of rounding
        gates[k] = m
    a = scale * rng.uniform(0.5, 1)
    rho = target.rho * np.array([1, 1 - a, 1 - a, 1 - a])
    eff = target.effect * np.array([1, 1 - a, 1 - a, 1 - a])
    return GateSet(rho, eff, gates)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def target():
    return ideal_gateset()


def perturb_vector(x, rng, scale):
    return x + scale * rng.normal(size=x.shape)


def central_gradient(f, x, h=1e-6):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def central_jacobian(f, x, h=1e-6):
    """Columns are d f / d x_i for a vector-valued f."""
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.array(cols).T


_PAULI = np.array([[[1, 0], [0, 1]], [[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]]) / np.sqrt(2)


def apply_ptm(delta, x):
    """Action of a PTM on (a stack of) complex 2x2 matrices via Pauli coefficients."""
    c = np.einsum("kij,...ji->...k", _PAULI, x)
    return np.einsum("jk,...k,jab->...ab", delta, c, _PAULI)


def _trace_norms(delta, psi):
    # psi[..., i, a]: system index i, ancilla index a.
    blocks = np.einsum("...ia,...jb->...abij", psi, psi.conj())
    out = apply_ptm(delta, blocks)  # [..., a, b, i, j]
    op = out.transpose(0, 3, 1, 4, 2).reshape(-1, 4, 4) if out.ndim == 5 else out.transpose(2, 0, 3, 1).reshape(4, 4)
    return np.abs(np.linalg.eigvalsh(op)).sum(-1)


def sampled_diamond_lower_bound(delta, rng, n=100_000, refine=400):
    """max ||(Delta x 1)[psi]||_1 over random two-qubit pure states, then a local hill climb."""
    psi = rng.normal(size=(n, 2, 2)) + 1j * rng.normal(size=(n, 2, 2))
    psi /= np.linalg.norm(psi.reshape(n, 4), axis=1)[:, None, None]
    vals = np.concatenate([_trace_norms(delta, psi[k: k + 20000]) for k in range(0, n, 20000)])
    best = psi[np.argmax(vals)]
    best_val = vals.max()
    step = 0.1
    for _ in range(refine):
        cand = best + step * (rng.normal(size=(64, 2, 2)) + 1j * rng.normal(size=(64, 2, 2)))
        cand /= np.linalg.norm(cand.reshape(64, 4), axis=1)[:, None, None]
        v = _trace_norms(delta, cand)
        if v.max() > best_val:
            best_val, best = v.max(), cand[np.argmax(v)]
        else:
            step *= 0.9
    return float(best_val)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
