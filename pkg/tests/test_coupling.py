"""Monte Carlo coupling checks: swapped-permutation gaps, the per-component
gradient gap, within-epoch drift, and iterate-sign statistics."""

import numpy as np
import pytest

from shuffle_sgd.coupling import (
    CSV_HEADER,
    CheckRow,
    couple_pair,
    epoch_drift_check,
    gradient_gap_check,
    posexp_check,
    rows_to_csv,
    swap_distance_check,
)
from shuffle_sgd.engine import RunConfig
from shuffle_sgd.objectives import PiecewiseFamily, make_f2, make_product2d
from shuffle_sgd.permutation import derive_stream


# ------------------------------------------------------------- couple_pair


def test_couple_pair_hand_trace():
    """n = 2 unit-curvature family, alpha = 0.1, swap the two positions:
    the trajectories mirror each other, gap 0.1 after step one and 0.01
    after step two, both under 2 G alpha = 0.2."""
    pair = couple_pair(make_f2(2), 0.1, np.array([1, 2], dtype=np.int64), 1, 2)
    assert pair.gaps.tolist() == pytest.approx([0.1, 0.01], rel=1e-14)
    assert pair.max_gap == 0.1
    assert pair.bound == pytest.approx(0.2, rel=1e-15)
    assert pair.passed
    base = np.ravel(pair.iterates_base).tolist()
    swapped = np.ravel(pair.iterates_swapped).tolist()
    assert base == pytest.approx([0.0, -0.05, 0.005], rel=1e-14, abs=0.0)
    assert swapped == pytest.approx([0.0, 0.05, -0.005], rel=1e-14, abs=0.0)


def test_couple_pair_identical_positions_gap_is_exactly_zero():
    """Swapping a position with itself couples a run to itself; any nonzero
    gap would mean the two replays read different streams."""
    fam = PiecewiseFamily(6, 4.0, 1.0)
    perm = np.array([3, 1, 6, 2, 5, 4], dtype=np.int64)
    pair = couple_pair(fam, 0.05, perm, 4, 4)
    assert pair.max_gap == 0.0
    assert np.all(pair.gaps == 0.0)


def test_couple_pair_vector_state():
    fam = make_product2d(4)
    perm = np.array([2, 4, 1, 3], dtype=np.int64)
    pair = couple_pair(fam, 0.01, perm, 1, 3)
    assert pair.iterates_base.shape == (5, 2)
    assert pair.max_gap <= pair.bound


def test_couple_pair_validation():
    fam = make_f2(4)
    good = np.array([1, 2, 3, 4], dtype=np.int64)
    with pytest.raises(ValueError):
        couple_pair(fam, 0.1, np.array([1, 1, 2, 3], dtype=np.int64), 1, 2)
    with pytest.raises(ValueError):
        couple_pair(fam, 0.1, good, 0, 2)
    with pytest.raises(ValueError):
        couple_pair(fam, 0.1, good, 1, 5)
    with pytest.raises(ValueError):
        couple_pair(fam, 3.0, good, 1, 2)  # alpha beyond 2/L


# ---------------------------------------------------------- swap distances


def test_swap_distance_check_rows_and_bound():
    fam = PiecewiseFamily(8, 4.0, 1.0)
    report = swap_distance_check(fam, 8, 0.01, trials=200, stream=derive_stream(0, 0, 0))
    assert report.passed
    assert len(report.rows) == 8
    assert [(r.i, r.j) for r in report.rows] == [(i, 1) for i in range(1, 9)]
    for row in report.rows:
        assert row.bound == pytest.approx(0.02, rel=1e-15)
        assert row.estimate <= row.bound * (1 + 1e-12)
        assert row.stderr == 0.0  # almost-sure claim, not a mean


def test_swap_distance_check_is_lineage_deterministic():
    fam = make_f2(4)
    a = swap_distance_check(fam, 4, 0.05, 50, derive_stream(3, 1, 0))
    b = swap_distance_check(fam, 4, 0.05, 50, derive_stream(3, 1, 0))
    assert [r.estimate for r in a.rows] == [r.estimate for r in b.rows]


def test_swap_distance_zero_alpha_zero_gap():
    fam = make_f2(4)
    report = swap_distance_check(fam, 4, 0.0, 20, derive_stream(0, 0, 0))
    assert report.passed
    assert all(r.estimate == 0.0 and r.bound == 0.0 for r in report.rows)


# ------------------------------------------------------------ gradient gap


def test_gradient_gap_check_structure_and_bound():
    """|E[F(x) - f_sigma(i)(x)]| at the pre-step iterate of the epoch after
    warmup must sit within 2 alpha G^2 plus Monte Carlo noise."""
    fam = PiecewiseFamily(8, 4.0, 1.0)
    report = gradient_gap_check(
        fam, 8, alpha=0.01, epochs_warmup=1, repeats=800, stream=derive_stream(0, 1, 0)
    )
    assert report.passed
    assert len(report.rows) == 8
    for row in report.rows:
        assert row.j == 2  # the epoch right after one warmup epoch
        assert row.bound == pytest.approx(2 * 0.01 * 1.0**2, rel=1e-15)
        assert abs(row.estimate) <= row.bound + 4 * row.stderr
        assert row.stderr > 0.0


def test_gradient_gap_check_deterministic():
    fam = make_f2(4)
    kwargs = dict(n=4, alpha=0.02, epochs_warmup=1, repeats=100)
    a = gradient_gap_check(fam, stream=derive_stream(7, 0, 0), **kwargs)
    b = gradient_gap_check(fam, stream=derive_stream(7, 0, 0), **kwargs)
    assert [r.estimate for r in a.rows] == [r.estimate for r in b.rows]


# ------------------------------------------------------------- epoch drift


def test_epoch_drift_check_bounds_grow_linearly():
    """E||x_i - x_0||^2 <= 5 i alpha^2 G^2 + 2 i alpha (F(x_0) - F*): the
    bound is linear in the step index i within the replayed epoch."""
    fam = PiecewiseFamily(8, 4.0, 1.0)
    cfg = RunConfig(family=fam, k_epochs=2, alpha=0.005, base_seed=0, sweep_index=4)
    report = epoch_drift_check(fam, cfg, repeats=400)
    assert report.passed
    assert len(report.rows) == 9
    trivial = report.rows[0]
    assert (trivial.i, trivial.estimate, trivial.bound) == (0, 0.0, 0.0)
    bounds = [r.bound for r in report.rows[1:]]
    increments = [b2 - b1 for b1, b2 in zip(bounds, bounds[1:])]
    assert all(inc == pytest.approx(increments[0], rel=1e-9) for inc in increments)
    assert all(r.j == 2 for r in report.rows)  # drift inside the last epoch


def test_epoch_drift_check_requires_matching_family():
    fam = make_f2(4)
    other = make_f2(4)
    cfg = RunConfig(family=fam, k_epochs=1, alpha=0.01)
    with pytest.raises(ValueError):
        epoch_drift_check(other, cfg, repeats=10)


def test_epoch_drift_check_requires_at_least_one_epoch():
    fam = make_f2(4)
    cfg = RunConfig(family=fam, k_epochs=0)
    with pytest.raises(ValueError):
        epoch_drift_check(fam, cfg, repeats=10)


# -------------------------------------------------------------- positivity


def test_posexp_check_one_sided_when_left_slope_exceeds_one():
    """Steeper left branch pushes iterates right: every recorded mean must
    clear -4 stderr, and at these sizes the final epoch is strictly
    positive."""
    fam = PiecewiseFamily(8, 4.0, 1.0)
    cfg = RunConfig(family=fam, k_epochs=3, alpha=0.05, base_seed=0, sweep_index=5)
    report = posexp_check(fam, cfg, repeats=1500)
    assert report.name == "posexp"
    assert report.passed
    assert report.rows[0].i == 0 and report.rows[0].j == 0
    final_epoch = [r for r in report.rows if r.j == 3 and r.i > 0]
    assert final_epoch
    assert all(r.estimate > 4 * r.stderr for r in final_epoch)


def test_posexp_check_control_two_sided_for_symmetric_family():
    """With equal curvature on both sides the +/- kinds are exchangeable,
    so the mean iterate stays within +/- 4 stderr of zero."""
    fam = make_f2(8)
    cfg = RunConfig(family=fam, k_epochs=3, alpha=0.05, base_seed=0, sweep_index=6)
    report = posexp_check(fam, cfg, repeats=1500)
    assert report.name == "posexp_control"
    assert report.passed
    for row in report.rows[1:]:
        assert abs(row.estimate) <= 4 * row.stderr


def test_posexp_check_rejects_large_alpha_and_nonzero_init():
    fam = PiecewiseFamily(4, 4.0, 1.0)
    with pytest.raises(ValueError):
        posexp_check(fam, RunConfig(family=fam, k_epochs=1, alpha=0.5), repeats=10)
    bad_init = RunConfig(family=fam, k_epochs=1, alpha=0.01, init=[1.0])
    with pytest.raises(ValueError):
        posexp_check(fam, bad_init, repeats=10)


def test_posexp_check_only_for_piecewise():
    fam = make_product2d(4)
    cfg = RunConfig(family=fam, k_epochs=1, alpha=0.01)
    with pytest.raises(TypeError):
        posexp_check(fam, cfg, repeats=10)


# --------------------------------------------------------------- reporting


def test_check_report_worst_is_minimum_margin():
    fam = PiecewiseFamily(8, 4.0, 1.0)
    report = swap_distance_check(fam, 8, 0.01, 100, derive_stream(0, 0, 0))
    worst = report.worst()
    assert worst.margin == min(r.margin for r in report.rows)
    assert "worst margin" in report.summary()


def test_rows_to_csv_format():
    rows = [
        CheckRow("demo", 1, 2, 0.25, 0.001, 0.5, 0.254, True),
        CheckRow("demo", 2, 2, -0.5, 0.0, 0.5, 0.0, False),
    ]
    text = rows_to_csv(rows)
    lines = text.strip().split("\n")
    assert lines[0] == CSV_HEADER
    assert lines[1] == "demo,1,2,0.25,0.001,0.5,1"
    assert lines[2] == "demo,2,2,-0.5,0,0.5,0"


def test_csv_line_uses_full_precision():
    row = CheckRow("p", 1, 1, 1 / 3, 0.0, 2 / 3, 1 / 3, True)
    line = row.csv_line()
    assert "0.33333333333333331" in line
