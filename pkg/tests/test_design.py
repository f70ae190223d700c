import numpy as np
import pytest

from conftest import near_target
from gstkit.design import (
    FiducialSet,
    amplificationally_complete,
    build_catalog,
    candidate_germs,
    default_fiducials,
    default_germs,
    default_schedule,
    finite_germ_jacobian,
    gauge_tangent_basis,
    germ_derivative,
    germ_score,
    gram_matrix,
    numerical_rank,
    select_germs,
    stacked_jacobian,
    twirled_germ_jacobian,
)
from gstkit.errors import InputError, NumericalError
from gstkit.gateset import ptm_from_unitary, rotation_unitary
from gstkit.sequences import EMPTY, format_sequence, parse_sequence, seq

BARE = [seq("Gx"), seq("Gy"), seq("Gi")]


def test_default_fiducial_order():
    f = default_fiducials()
    assert [format_sequence(s) for s in f.prep] == ["{}", "Gx", "Gy", "GxGx", "GxGxGx", "GyGyGy"]
    assert f.meas == f.prep


def test_default_germs():
    g = default_germs()
    assert len(g) == 11 and len(set(g)) == 11
    assert all(len(s) >= 1 for s in g)


def test_schedule():
    assert default_schedule(8192) == tuple(2**k for k in range(14))
    assert default_schedule(5) == (1, 2, 4)
    with pytest.raises(InputError):
        default_schedule(0)


def test_default_catalog_size():
    cat = build_catalog()
    assert 4500 <= len(cat) <= 5500
    assert len(cat) == 4657  # regression value
    assert len(set(cat.sequences)) == len(cat)


def test_long_germs_absent_at_short_L():
    cat = build_catalog()
    g3 = parse_sequence("GxGyGi").labels
    present = {s.provenance.length for s in cat if s.provenance and s.provenance.germ == g3}
    assert 1 not in present and 2 not in present
    assert min(present) == 4


def test_single_germ_single_pair():
    f = FiducialSet((EMPTY,), (EMPTY,))
    cat = build_catalog(f, [seq("Gx")], (1, 2), gate_labels=())
    assert [format_sequence(s) for s in cat if s.provenance.germ] == ["Gx", "(Gx)^2"]


def test_lgst_sequences_always_present():
    cat = build_catalog(schedule=(1,))
    f = default_fiducials()
    for fi in f.prep:
        for fj in f.meas:
            assert fi + fj in cat
            for g in ("Gi", "Gx", "Gy"):
                assert fi + seq(g) + fj in cat


def test_duplicates_keep_smallest_L():
    cat = build_catalog()
    s = parse_sequence("(Gx)^4")  # germ Gx at L=4 and also a fiducial-sandwich of GxGx at L=2
    s = cat.sequences[cat.index(s)]
    assert s.provenance.length <= 4
    for item in cat:
        if item.provenance and item.provenance.germ:
            g = item.provenance.germ
            assert len(item) >= len(g)


def test_catalog_deterministic(tmp_path):
    from gstkit import io

    a = io.write_catalog(tmp_path / "a.txt", build_catalog(schedule=default_schedule(64)))
    b = io.write_catalog(tmp_path / "b.txt", build_catalog(schedule=default_schedule(64)))
    assert a.read_bytes() == b.read_bytes()


def test_catalog_rejects_bad_schedule():
    with pytest.raises(InputError):
        build_catalog(schedule=(1, 4, 2))
    with pytest.raises(InputError):
        build_catalog(germs=[seq("Gx"), seq("Gx")])


def test_gram_ideal_rank_four(target):
    g, sv = gram_matrix(target)
    assert numerical_rank(sv) == 4
    assert np.all(np.diff(sv) <= 1e-12)
    # stabilizer fiducials give singular values (3, 1, 1, 1)
    assert np.allclose(sv[:4], [3, 1, 1, 1], atol=1e-12)
    assert sv[4:].max() < 1e-12


def test_gram_rank_deficient_without_gy(target):
    gs = target.replace(gates={"Gy": np.eye(4)})
    assert numerical_rank(gram_matrix(gs)[1]) < 4


def test_gram_zero_effect(target):
    g, sv = gram_matrix(target.replace(effect=np.zeros(4)))
    assert np.array_equal(g, np.zeros((6, 6)))


def test_germ_derivative_finite_difference(rng):
    gs = near_target(rng)
    germ = parse_sequence("GxGyGi")
    sigma, d = germ_derivative(gs, germ)
    k, r, c = 1, 2, 3
    idx = 12 * k + 4 * (r - 1) + c
    h = 1e-6
    lbl = gs.labels[k]
    up = gs.gates[lbl].copy()
    up[r, c] += h
    dn = gs.gates[lbl].copy()
    dn[r, c] -= h
    from gstkit.gateset import sequence_product

    fd = (sequence_product(gs.replace(gates={lbl: up}), germ) - sequence_product(gs.replace(gates={lbl: dn}), germ)) / (2 * h)
    assert np.abs(fd - d[:, :, idx]).max() < 1e-8


def _direction(gs, label, delta):
    """Parameter-space direction of a gate perturbation delta (rows 1..3)."""
    v = np.zeros(12 * len(gs.labels))
    k = gs.labels.index(label)
    v[12 * k : 12 * k + 12] = delta[1:].ravel()
    return v


def _tilt_direction(target):
    eps = 1e-6
    u = rotation_unitary([np.cos(eps), np.sin(eps), 0], np.pi / 2)
    return _direction(target, "Gx", (ptm_from_unitary(u) - target.gates["Gx"]) / eps)


def test_gx_germ_does_not_amplify_tilt(target):
    j = twirled_germ_jacobian(target, seq("Gx"))
    t = _tilt_direction(target)
    assert np.linalg.norm(j @ t) < 1e-5 * np.linalg.norm(t)


def test_gxgy_germ_amplifies_tilt(target):
    j = twirled_germ_jacobian(target, parse_sequence("GxGy"))
    t = _tilt_direction(target)
    assert np.linalg.norm(j @ t) > 0.1 * np.linalg.norm(t)


def test_gauge_direction_not_amplified(target, rng):
    # A pure gauge perturbation of a germ's gates changes sigma(g) by a commutator [T, sigma], which the
    # commutant projection removes.
    gauge = gauge_tangent_basis(target)
    for g in default_germs():
        j = twirled_germ_jacobian(target, g)
        assert np.linalg.norm(j @ gauge.basis, 2) < 1e-10


def test_gauge_ranks(target, rng):
    gb = gauge_tangent_basis(target)
    assert gb.n_generators == 12
    assert gb.rank == 11  # diag(0,1,1,1) commutes with the unital ideal gates
    assert gauge_tangent_basis(target, include_spam=True).rank == 12
    # diag(0,1,1,1) commutes with any unital gate; a non-unital gate breaks the degeneracy
    gs = near_target(rng)
    assert gauge_tangent_basis(gs).rank == 11
    damp = gs.gates["Gx"].copy()
    damp[3, 0] = 0.01
    assert gauge_tangent_basis(gs.replace(gates={"Gx": damp})).rank == 12
    assert np.abs(gb.basis.T @ gb.basis - np.eye(gb.rank)).max() < 1e-12


def test_gauge_rank_identity_gate():
    from gstkit.gateset import GateSet

    gs = GateSet(np.array([1, 0, 0, 1]) / np.sqrt(2), np.array([1, 0, 0, -1]) / np.sqrt(2), {"Gi": np.eye(4)})
    assert gauge_tangent_basis(gs).rank < 12


def test_eleven_germs_ac_bare_not(target):
    gauge = gauge_tangent_basis(target)
    full = amplificationally_complete(stacked_jacobian(target, default_germs()), gauge)
    assert full.complete and full.rank == full.dimension
    bare = amplificationally_complete(stacked_jacobian(target, BARE), gauge)
    assert not bare.complete
    assert bare.rank < bare.dimension
    empty = amplificationally_complete(stacked_jacobian(target, []), gauge)
    assert not empty.complete
    assert np.all(np.diff(full.singular_values) <= 1e-12)


def test_jacobian_shape(target):
    j = stacked_jacobian(target, default_germs())
    assert j.shape == (12 * 11, 36)


def _order(sigma, max_n=64):
    p = np.eye(4)
    for n in range(1, max_n + 1):
        p = sigma @ p
        if np.abs(p - np.eye(4)).max() < 1e-9:
            return n
    return None


def test_twirl_matches_brute_force_average(target):
    for g in default_germs():
        sigma = germ_derivative(target, g)[0]
        order = _order(sigma)
        for L in (64, 96):
            if 64 % order and L == 64:
                continue
            a = np.linalg.svd(twirled_germ_jacobian(target, g), compute_uv=False)
            b = np.linalg.svd(finite_germ_jacobian(target, g, L), compute_uv=False)
            assert np.abs(a - b).max() < 1e-6, (format_sequence(g), L)


def test_germ_score_properties(target):
    gauge = gauge_tangent_basis(target)
    j = stacked_jacobian(target, default_germs())
    s11 = germ_score(j, gauge)
    assert np.isfinite(s11) and s11 > 0
    assert germ_score(stacked_jacobian(target, BARE), gauge) == float("inf")
    jd = stacked_jacobian(target, list(default_germs()) + [seq("Gx")])
    assert germ_score(jd, gauge, 12) > s11


def test_germ_score_regression(target):
    gauge = gauge_tangent_basis(target)
    s11 = germ_score(stacked_jacobian(target, default_germs()), gauge)
    assert s11 == pytest.approx(S11_BASELINE, rel=1e-9)


def test_candidates():
    c = candidate_germs(max_length=2)
    assert [format_sequence(s) for s in c] == ["Gi", "Gx", "Gy", "GiGx", "GiGy", "GxGy"]
    c6 = candidate_germs(max_length=6)
    assert len(c6) == len(set(c6))


def test_select_from_eleven(target):
    res = select_germs(default_germs(), target, seed=1)
    gauge = gauge_tangent_basis(target)
    assert set(res.germs) <= set(default_germs())
    assert amplificationally_complete(stacked_jacobian(target, res.germs), gauge).complete
    assert all(b <= a for a, b in zip(res.trace, res.trace[1:]))
    # local optimum: no single add/remove move lowers the score
    for g in default_germs():
        trial = [h for h in res.germs if h != g] if g in res.germs else list(res.germs) + [g]
        assert germ_score(stacked_jacobian(target, trial), gauge, len(trial)) >= res.score - 1e-12
    assert select_germs(default_germs(), target, seed=1).germs == res.germs


def test_select_short_pool_fixture(target):
    # recorded fixture: words of length <= 2 cannot amplify two non-gauge directions at ideal gates
    with pytest.raises(NumericalError, match="2 non-gauge"):
        select_germs(candidate_germs(max_length=2), target, seed=0)


def test_select_length_three_pool(target):
    res = select_germs(candidate_germs(max_length=3), target, seed=0)
    gauge = gauge_tangent_basis(target)
    assert amplificationally_complete(stacked_jacobian(target, res.germs), gauge).complete


def test_select_without_gi_fails(target):
    pool = [g for g in candidate_germs(max_length=4) if "Gi" not in g.labels]
    with pytest.raises(NumericalError, match="non-gauge"):
        select_germs(pool, target, seed=0)


S11_BASELINE = 90.18537020961297
