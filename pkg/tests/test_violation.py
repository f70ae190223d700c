import numpy as np
import pytest
from scipy.stats import chi2 as chi2_dist

from conftest import near_target
from gstkit.design import build_catalog, default_germs
from gstkit.errors import InputError
from gstkit.estimation import FitConfig, run_pipeline
from gstkit.gateset import GateSet
from gstkit.gauge import apply_gauge, tp_gauge_matrix
from gstkit.simulate import CompositeModel, exact_dataset, simulate_composite, simulate_dataset
from gstkit.violation import (
    DofLedger,
    build_grid,
    effective_param_count,
    n_sigma,
    two_delta_logl,
    violation_summary,
)


@pytest.fixture(scope="module")
def catalog():
    return build_catalog(schedule=(1, 2, 4, 8))


def test_exact_data_zero(catalog, rng):
    gs = near_target(rng)
    total, terms = two_delta_logl(gs, exact_dataset(gs, catalog.sequences, 100))
    # Only the eps clip of p near 0 or 1 separates log L from the entropy.
    assert abs(total) < 1e-3
    assert np.all(terms >= -1e-9)


def test_hand_value():
    from gstkit.dataset import DataSet
    from gstkit.sequences import seq

    # Single-sequence set reproducing p = 0.6 exactly: rho and E along x.
    gs = GateSet([1 / np.sqrt(2), 0.1 * np.sqrt(2), 0, 0], [1 / np.sqrt(2), 1 / np.sqrt(2), 0, 0], {"Gi": np.eye(4)})
    ds = DataSet([seq("Gi")], [100], [50])
    total, _ = two_delta_logl(gs, ds)
    assert total == pytest.approx(200 * (0.5 * np.log(0.5 / 0.6) + 0.5 * np.log(0.5 / 0.4)), rel=1e-9)


def test_n_sigma_formula():
    led = DofLedger(1000, 31)
    k = led.k
    assert k == 969
    assert n_sigma(k, led) == 0.0
    assert n_sigma(k + np.sqrt(2 * k), led) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(InputError):
        n_sigma(1.0, DofLedger(10, 31))


def test_effective_param_count(target, rng):
    # 43 raw parameters minus a 12-dimensional gauge orbit.
    assert effective_param_count(target) == 31
    one = GateSet(target.rho, target.effect, {"Gx": target.gates["Gx"]})
    # One x rotation with z-axis SPAM leaves a 1-dimensional stabilizer: gauge rank 11.
    assert effective_param_count(one) == 19 - 11
    assert effective_param_count(near_target(rng)) == 31


def test_partition_and_gauge_invariance(catalog, rng):
    gs = near_target(rng)
    ds = simulate_dataset(gs, catalog.sequences, 100, seed=4)
    total, terms = two_delta_logl(gs, ds)
    grid = build_grid(terms, ds.sequences)
    assert grid.total == pytest.approx(total, abs=1e-9)
    moved = apply_gauge(gs, tp_gauge_matrix(0.1 * rng.normal(size=12)))
    _, terms2 = two_delta_logl(moved, ds)
    assert np.abs(terms2 - terms).max() < 1e-10


def test_grid_shape(catalog, rng):
    gs = near_target(rng)
    ds = simulate_dataset(gs, catalog.sequences, 100, seed=4)
    grid = build_grid(two_delta_logl(gs, ds)[1], ds.sequences)
    assert set(grid.germs) == {g.labels for g in default_germs()}
    assert grid.lengths == [1, 2, 4, 8]
    ncells = len(grid.cells)
    for (germ, L), cell in grid.cells.items():
        assert cell.total >= -1e-9
        assert len(germ) <= L
        assert cell.threshold == pytest.approx(chi2_dist.ppf(1 - 0.05 / ncells, cell.count))
    # Germs longer than L have no cells.
    long = [g for g in grid.germs if len(g) > 1]
    assert all((g, 1) not in grid.cells for g in long)
    assert max(c.count for c in grid.cells.values()) == 36


def test_grid_length_mismatch(catalog):
    with pytest.raises(InputError):
        build_grid(np.zeros(3), catalog.sequences[:4])


def test_markovian_summary_calibrated(target):
    truth = near_target(np.random.default_rng(9))
    cfg = FitConfig(max_length=16)
    cat = build_catalog(schedule=cfg.schedule)
    ds = simulate_dataset(truth, cat.sequences, 100, seed=10)
    b = run_pipeline(ds, target, cfg=cfg, catalog=cat)
    s = violation_summary(b.final, b_ds := ds.subset(cat.sequences))
    assert s["n_params"] == 31 and s["k"] == len(b_ds) - 31
    assert abs(s["n_sigma"]) <= 5
    assert s["grid"].n_flagged == 0


def test_strong_composite_flags_long_cells(target):
    cfg = FitConfig(max_length=64)
    cat = build_catalog(schedule=cfg.schedule)
    cm = CompositeModel(target, 0.1)
    ds = simulate_composite(cm, cat.sequences, 100, seed=3)
    b = run_pipeline(ds, target, cfg=cfg, catalog=cat)
    s = violation_summary(b.final, ds)
    assert s["n_sigma"] > 3
    flagged = [L for (_, L), c in s["grid"].cells.items() if c.flagged]
    assert flagged
    assert max(flagged) >= 16
