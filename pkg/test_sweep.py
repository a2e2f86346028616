"""
test_sweep.py - Sweep records, crossing summary, run configuration, and a small frozen-shape run
"""

import math
import os

import numpy as np
import pytest

from backend import load_config
from config import SweepConfig, CSV_COLUMNS, EIGEN_TOL
from errors import ConfigError, NumericalError, WeakCrossingWarning
from geometry import Grid2D, bounding_box
from helmholtz import AvoidedCrossing, EigenMode, track_branches, mode_parity
from synthetic import two_level_family
from sweep import SweepRecord, SweepManager, summarize, branch_exchange, run_sweep


def _records(branch: str, thetas, peak: float = 0.3):
    rows = []
    for t in thetas:
        rows.append(SweepRecord(
            theta=float(t), branch=branch, k=6.0 + t, h_r=3.0, h_i=1.0 - (t - peak) ** 2, N=0.2,
            Z_plus=1.2, F_plus=1.0 + 0.5 * np.exp(-(t - 0.1) ** 2), F_minus=2.0 + np.exp(-(t - peak) ** 2),
            F_tilde_minus=3.0, dhi_fd=-2 * (t - peak), dhi_score=-2 * (t - peak), bound_rhs=1.0,
            slack=0.5 + t, decomp_residual=0.0, masked_fraction=0.0, mean_score=t - peak))
    return rows


# -----------------------------------------------------------------------------
# Records and summary
# -----------------------------------------------------------------------------
def test_record_row_follows_csv_columns():
    rec = _records("mode 1", [0.0])[0]
    row = rec.csv_row()
    assert len(row) == len(CSV_COLUMNS)
    assert row[0] == 0.0 and row[1] == "mode 1"
    assert row[CSV_COLUMNS.index('degenerate_flag')] == 0
    d = rec.to_dict()
    assert set(CSV_COLUMNS) <= set(d) and d['resolution'] == ""


def test_summary_locates_extrema():
    thetas = np.linspace(0.0, 0.6, 7)
    records = _records("mode 1", thetas) + _records("mode 2", thetas, peak=0.4)
    crossing = AvoidedCrossing(theta_star=0.3, gap=0.05, index=3)
    summary = summarize(records, crossing)
    assert summary['theta_star'] == 0.3 and summary['crossing_interior']

    first = summary['branches']['mode 1']
    assert first['samples'] == 7 and first['degenerate'] == 0
    assert first['argmax_h_i'] == pytest.approx(0.3)
    assert first['argmin_abs_dhi'] == pytest.approx(0.3)
    assert first['argmax_F_minus'] == pytest.approx(0.3)
    assert first['argmax_F_plus'] == pytest.approx(0.1)
    assert first['F_minus_exceeds_F_plus']
    assert first['min_slack'] == pytest.approx(0.5)
    assert first['offsets']['argmax_h_i'] == pytest.approx(0.0, abs=1e-12)
    assert first['offsets']['argmax_F_plus'] == pytest.approx(-0.2)
    assert first['h_i_extremum']['found']
    assert first['h_i_extremum']['theta'] == pytest.approx(0.3, abs=1e-9)

    second = summary['branches']['mode 2']
    assert second['argmax_h_i'] == pytest.approx(0.4)
    assert second['offsets']['argmax_h_i'] == pytest.approx(0.1)


def test_summary_skips_degenerate_rows():
    thetas = np.linspace(0.0, 0.6, 7)
    records = _records("mode 1", thetas)
    bad = records[3]
    bad.degenerate_flag = 1
    bad.F_minus = bad.F_plus = float('nan')
    entry = summarize(records)['branches']['mode 1']
    assert entry['degenerate'] == 1
    assert entry['argmax_F_minus'] != pytest.approx(0.3)
    assert np.isnan(summarize(records)['theta_star'])


def test_branch_exchange_across_avoided_crossing():
    thetas = np.linspace(-1.0, 1.0, 41)
    lower, upper = track_branches(two_level_family(thetas, g=0.05), thetas)
    out = branch_exchange(lower, upper)
    assert out['exchanged']
    assert out['cross_first'] > 0.99 and out['self_first'] < 0.1


def test_no_exchange_for_strong_coupling():
    thetas = np.linspace(-0.1, 0.1, 11)
    lower, upper = track_branches(two_level_family(thetas, g=5.0), thetas)
    assert not branch_exchange(lower, upper)['exchanged']


# -----------------------------------------------------------------------------
# Configuration
# -----------------------------------------------------------------------------
def test_delta_defaults_to_half_spacing():
    c = SweepConfig(theta_min=0.0, theta_max=0.4, theta_count=5)
    assert c.theta_spacing == pytest.approx(0.1)
    assert c.delta == pytest.approx(0.05)
    assert SweepConfig(fisher_delta=1e-3).delta == 1e-3


def test_delta_must_stay_below_spacing():
    c = SweepConfig(theta_min=0.0, theta_max=0.2, theta_count=3, fisher_delta=0.15)
    with pytest.raises(ConfigError, match="spacing"):
        c.validate()


@pytest.mark.parametrize("overrides", [
    {'theta_max': 0.9},
    {'theta_count': 1},
    {'theta_min': 0.5, 'theta_max': 0.5},
    {'wigner_momenta': 47},
    {'mode_count': 1},
    {'k_min': 8.0, 'k_max': 5.0},
    {'max_gap_ratio': 1.5},
    {'wigner_quadrature_limit': 0.0},
    {'score_floor': 0.0},
    {'a': -1.0},
])
def test_invalid_configs(overrides):
    with pytest.raises(ConfigError):
        SweepConfig(**overrides).validate()


def test_solver_grid_covers_every_shape():
    c = SweepConfig(theta_min=0.0, theta_max=0.5, theta_count=6, solver_h=1.0 / 16)
    manager = SweepManager(c)
    g = manager.grid
    for t in np.linspace(-c.delta, 0.5 + c.delta, 31):
        x0, x1, y0, y1 = bounding_box(manager.shape_at(t))
        assert g.x[0] < x0 and g.x[-1] > x1
        assert g.y[0] < y0 and g.y[-1] > y1
    np.testing.assert_allclose(g.y, -g.y[::-1], atol=1e-14)


def test_frozen_shape_keeps_the_ellipse():
    c = SweepConfig(freeze_shape=True)
    assert SweepManager(c).shape_at(0.4).theta == 0.0


# -----------------------------------------------------------------------------
# Small run
# -----------------------------------------------------------------------------
@pytest.fixture(scope="module")
def frozen_run():
    config = SweepConfig(a=1.2, b=1.0, theta_min=0.0, theta_max=0.02, theta_count=3,
                         solver_h=1.0 / 16, k_min=0.0, k_max=8.0, mode_count=4,
                         wigner_positions=16, wigner_momenta=16, slice_size=32,
                         wigner_quadrature_limit=0.2, freeze_shape=True, dump_slices=True)
    with pytest.warns(UserWarning):
        return run_sweep(config)


@pytest.mark.slow
def test_frozen_run_has_no_theta_dependence(frozen_run):
    res = frozen_run
    assert len(res.records) == 2 * 3
    labels = {r.branch for r in res.records}
    assert len(labels) == 2
    for label in labels:
        rows = [r for r in res.records if r.branch == label]
        assert all(r.h_i == rows[0].h_i for r in rows)
        for r in rows:
            assert r.degenerate_flag == 0
            assert abs(r.F_minus) <= 1e-10 and abs(r.F_plus) <= 1e-10
            assert abs(r.dhi_score) <= 1e-10
            assert r.slack >= -1e-12
            assert r.resolution.startswith("h=0.0625;")


@pytest.mark.slow
def test_frozen_run_summary_and_labels(frozen_run):
    res = frozen_run
    first, second = (res.branches[i] for i in res.pair)
    assert res.summary['pair'] == [first.label, second.label]
    assert not res.summary['branch_exchange']['exchanged']
    assert [p.label for p in res.labeled] == list("ABCDEF")
    assert [p.index for p in res.labeled[:3]] == [0, res.crossing.index, 2]
    assert set(res.slices) == set("ABCDEF")
    sx, sy = res.slices['A']
    assert sx.axis == 'X' and sy.axis == 'Y'
    assert res.summary['max_drift'] <= 1e-4
    assert res.summary['max_quadrature_error'] <= 0.2
    assert not res.summary['crossing_qualified']


# -----------------------------------------------------------------------------
# Crossing-pair selection
# -----------------------------------------------------------------------------
def _even_two_level(thetas, g: float):
    """two_level_family moved onto a y-symmetric grid, both columns equal (even in y)."""
    grid = Grid2D(0.0, -0.5, 1.0, 1.0, 2, 2)
    per_theta = [[EigenMode(m.k, np.repeat(m.psi[:, :1], 2, axis=1) / math.sqrt(2.0), grid)
                  for m in modes] for modes in two_level_family(thetas, g=g)]
    return track_branches(per_theta, thetas)


def _manager_with(branches, k_min: float, k_max: float) -> SweepManager:
    manager = SweepManager(SweepConfig(k_min=k_min, k_max=k_max, solver_h=1.0 / 16))
    manager.branches = list(branches)
    return manager


def test_select_pair_takes_a_qualified_crossing():
    thetas = np.linspace(-1.0, 1.0, 41)
    manager = _manager_with(_even_two_level(thetas, g=0.05), 8.0, 12.0)
    assert mode_parity(manager.branches[0].samples[0].mode) == 1
    assert manager.crossing_defect(0, 1) is None
    pair, crossing = manager.select_pair()
    assert pair == (0, 1)
    assert crossing.theta_star == pytest.approx(0.0, abs=1e-9)
    assert len(manager.crossings) == 1


def test_strongly_coupled_pair_falls_back_with_warning():
    thetas = np.linspace(-0.1, 0.1, 11)
    manager = _manager_with(_even_two_level(thetas, g=5.0), 4.0, 16.0)
    assert "not below" in manager.crossing_defect(0, 1)
    with pytest.warns(WeakCrossingWarning):
        pair, _ = manager.select_pair()
    assert pair == (0, 1) and manager.crossings == []


def test_pair_outside_the_window_is_rejected():
    thetas = np.linspace(-1.0, 1.0, 41)
    manager = _manager_with(_even_two_level(thetas, g=0.05), 12.0, 14.0)
    with pytest.raises(NumericalError):
        manager.select_pair()


@pytest.mark.slow
def test_default_config_tracks_from_below_the_window():
    config = load_config(os.path.join(os.path.dirname(os.path.abspath(__file__)), "default.cfg"))
    manager = SweepManager(config)
    branches = manager.track()
    assert len(branches) == manager.below + config.mode_count
    assert all(len(b) == config.theta_count for b in branches)
    assert branches[0].ks[0] < config.k_min

    (i, j), crossing = manager.select_pair()
    first, second = manager.branches[i], manager.branches[j]
    assert mode_parity(first.samples[0].mode) == mode_parity(second.samples[0].mode)
    g = int(np.argmin(np.abs(second.ks - first.ks)))
    for k in (first.ks[g], second.ks[g]):
        assert config.k_min <= k <= config.k_max


# -----------------------------------------------------------------------------
# Oval run through an avoided crossing
# -----------------------------------------------------------------------------
OVAL = dict(a=1.2, b=1.0, solver_h=1.0 / 32)


def _zoom_config() -> SweepConfig:
    """Scan [0, 0.6] coarsely, then centre a finer sweep on the first qualified crossing."""
    scout = SweepManager(SweepConfig(theta_min=0.0, theta_max=0.6, theta_count=25,
                                     k_min=4.0, k_max=9.0, mode_count=16, **OVAL))
    scout.track()
    scout.select_pair()
    assert scout.crossings, "no qualified avoided crossing in [0, 0.6]"
    (i, j), crossing = scout.crossings[0]
    first, second = scout.branches[i].ks, scout.branches[j].ks
    gaps = np.abs(second - first)
    # two-level fit gap(t)^2 = (s (t - t*))^2 + gap^2 from the farther sweep end
    end = 0 if crossing.theta_star - scout.thetas[0] > scout.thetas[-1] - crossing.theta_star else -1
    slope = math.sqrt(max(gaps[end] ** 2 - crossing.gap ** 2, 0.0)) / abs(scout.thetas[end] - crossing.theta_star)
    half = min(5.0 * crossing.gap / slope, crossing.theta_star, 0.6 - crossing.theta_star)
    half = max(half, 2 * scout.config.theta_spacing)
    g = crossing.index
    k_lo, k_hi = min(first[g], second[g]), max(first[g], second[g])
    return SweepConfig(theta_min=crossing.theta_star - half, theta_max=crossing.theta_star + half,
                       theta_count=15, k_min=k_lo - 0.05, k_max=k_hi + 0.05, mode_count=4,
                       wigner_positions=32, wigner_momenta=32, wigner_quadrature_limit=0.05,
                       **OVAL)


@pytest.fixture(scope="module")
def oval_run():
    return run_sweep(_zoom_config())


@pytest.mark.slow
def test_oval_run_exchanges_character(oval_run):
    res = oval_run
    ex = res.summary['branch_exchange']
    assert res.summary['crossing_qualified'] and res.crossing.interior
    assert min(ex['cross_first'], ex['cross_second']) > 0.7
    assert max(ex['self_first'], ex['self_second']) < 0.5
    k = max(r.k for r in res.records)
    assert res.crossing.gap > 10 * EIGEN_TOL * k


@pytest.mark.slow
def test_oval_run_identities(oval_run):
    for r in oval_run.records:
        assert r.drift < 1e-6
        assert r.h_i == pytest.approx(math.pi * r.N, rel=1e-12)
        if r.degenerate_flag:
            continue
        assert r.Z_plus - r.N == pytest.approx(1.0, abs=1e-6)
        assert abs(r.decomp_residual) <= 0.02 * r.F_tilde_minus
        assert r.slack >= -1e-9 * r.bound_rhs


@pytest.mark.slow
def test_oval_run_peaks_sit_at_the_crossing(oval_run):
    res = oval_run
    step = res.summary['theta_spacing']
    star = res.crossing.theta_star
    for label, entry in res.summary['branches'].items():
        assert entry['degenerate'] == 0
        assert entry['h_i_extremum']['found']
        assert abs(entry['argmax_h_i'] - star) <= 2 * step + 1e-12
        assert abs(entry['argmin_abs_dhi'] - star) <= 2 * step + 1e-12
        assert abs(entry['argmax_F_minus'] - star) <= 3 * step + 1e-12
        assert abs(entry['argmax_F_plus'] - star) <= 3 * step + 1e-12
    theta_at = float(res.branches[res.pair[0]].thetas[res.crossing.index])
    for label in res.summary['branches']:
        at_star = next(r for r in res.records if r.branch == label and r.theta == theta_at)
        assert at_star.F_minus > at_star.F_plus


@pytest.mark.slow
def test_oval_run_center_consistency(oval_run):
    res = oval_run
    for label, entry in res.summary['branches'].items():
        center = entry['h_i_extremum']
        rows = sorted((r for r in res.records if r.branch == label), key=lambda r: r.theta)
        F_tilde = rows[center['index']].F_tilde_minus
        assert center['abs_mean_score'] < 0.05 * math.sqrt(F_tilde)
        assert center['relative_gap'] < 0.05
