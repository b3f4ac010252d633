import math

import numpy as np
import pytest

from loopmem.components import (
    CIRCULATOR_ARM, COUPLER, FIBER_SEGMENT, FPC, POCKELS_CELL, RETROREFLECTOR,
    ComponentSpec, fiber_transmission,
)
from loopmem.counting import DecayScan, malus_mean, run_scan, synth_malus_dataset
from loopmem.engine import MemoryConfig, TransmissionParams, efficiency
from loopmem.errors import IncompleteSetError, NoSignalError, SchemaError
from loopmem.fitting import (
    default_attenuation_db_per_km, fit_decay, fit_malus, lifetime_1e,
    project_budget, route_inventory,
)
from loopmem.polarization import H

SHORT = TransmissionParams(0.541, 0.419, 0.50, 0.662)
ANGLES = tuple(np.linspace(0.0, math.pi, 13))


def fringe_counts(amplitude, visibility, theta0, angles=ANGLES):
    return [malus_mean(t, amplitude, visibility, theta0) for t in angles]


# --- fringe fit ---

def test_malus_exact_full_visibility():
    fit = fit_malus(ANGLES, fringe_counts(4000.0, 1.0, math.pi / 8))
    assert fit.visibility == pytest.approx(1.0, abs=1e-12)
    assert fit.amplitude == pytest.approx(4000.0, rel=1e-12)
    assert fit.theta0 == pytest.approx(math.pi / 8, abs=1e-12)
    assert fit.sigma_visibility < 1e-6  # exact data: scaled covariance vanishes
    assert not fit.clamped


def test_malus_partial_visibility():
    fit = fit_malus(ANGLES, fringe_counts(2000.0, 0.8609, 0.3))
    assert fit.visibility == pytest.approx(0.8609, abs=1e-12)
    assert fit.theta0 == pytest.approx(0.3, abs=1e-12)


def test_malus_flat_fringe():
    fit = fit_malus(ANGLES, [750.0] * len(ANGLES))
    assert fit.visibility < 1e-12
    assert fit.amplitude == pytest.approx(1500.0, rel=1e-9)
    assert not fit.clamped


def test_malus_clamps_overunity():
    # grid avoids the trough so all model counts stay positive
    fit = fit_malus(ANGLES, fringe_counts(3000.0, 1.02, math.pi / 8))
    assert fit.clamped
    assert fit.visibility == 1.0


def test_malus_scale_invariance():
    base = fringe_counts(1000.0, 0.7646, 1.1)
    a = fit_malus(ANGLES, base)
    b = fit_malus(ANGLES, [39.0 * c for c in base])
    assert b.visibility == pytest.approx(a.visibility, abs=1e-9)
    assert b.theta0 == pytest.approx(a.theta0, abs=1e-9)
    assert b.amplitude == pytest.approx(39.0 * a.amplitude, rel=1e-9)


def test_malus_validation():
    with pytest.raises(ValueError):
        fit_malus(ANGLES, [1.0] * 5)
    with pytest.raises(ValueError):
        fit_malus((0.0, 0.1, 0.2, 0.1, 0.0), [1.0] * 5)  # 3 distinct angles
    with pytest.raises(ValueError):
        fit_malus(tuple(np.linspace(0, 1.0, 7)), [1.0] * 7)  # span < pi
    with pytest.raises(NoSignalError):
        fit_malus(ANGLES, [0.0] * len(ANGLES))
    with pytest.raises(ValueError):
        fit_malus(ANGLES, [-1.0] + [1.0] * (len(ANGLES) - 1))
    degenerate = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2, 2 * math.pi)
    with pytest.raises(IncompleteSetError):
        fit_malus(degenerate, [1.0, 2.0, 1.0, 2.0, 1.0])


# --- decay fit ---

def test_decay_exact_recovery():
    n = list(range(1, 9))
    counts = [1e5 * 0.49 ** m for m in n]
    fit = fit_decay(n, counts)
    assert fit.gamma_per_cycle == pytest.approx(0.49, abs=1e-12)
    assert fit.prefactor == pytest.approx(1e5 * 0.49, rel=1e-9)
    assert fit.sigma_gamma < 1e-6
    assert fit.n_excluded == 0 and not fit.clamped


def test_decay_matches_simulator_closed_form():
    cfg = MemoryConfig.from_params(SHORT, delta_tau=36.5)
    ds = run_scan(cfg, H, DecayScan(), pair_rate=2000.0, acquisition_s=60.0, seed=None)
    fit = fit_decay([int(r.setting_value) for r in ds.records], ds.counts())
    assert fit.gamma_per_cycle == pytest.approx(0.50, abs=1e-12)
    assert fit.prefactor == pytest.approx(2000.0 * 60.0 * 0.419 * 0.662, rel=1e-9)


def test_decay_excludes_zero_counts():
    fit = fit_decay([1, 2, 3, 4, 5], [800.0, 400.0, 0.0, 100.0, 50.0])
    assert fit.n_excluded == 1
    assert fit.gamma_per_cycle == pytest.approx(0.5, abs=1e-12)


def test_decay_clamps_growth():
    fit = fit_decay([1, 2, 3, 4], [100.0, 200.0, 400.0, 800.0])
    assert fit.clamped
    assert fit.gamma_per_cycle == 1.0


def test_decay_constant_counts():
    # boundary case: rounding can land either side of 1, clamp keeps it legal
    fit = fit_decay([1, 2, 3, 4], [512.0] * 4)
    assert fit.gamma_per_cycle == pytest.approx(1.0, abs=1e-12)
    assert fit.gamma_per_cycle <= 1.0


def test_decay_validation():
    with pytest.raises(ValueError):
        fit_decay([1, 2], [10.0, 5.0])
    with pytest.raises(ValueError):
        fit_decay([0, 1, 2], [10.0, 5.0, 2.0])
    with pytest.raises(ValueError):
        fit_decay([1.5, 2, 3], [10.0, 5.0, 2.0])
    with pytest.raises(ValueError):
        fit_decay([1, 2, 3], [10.0, 5.0])
    with pytest.raises(NoSignalError):
        fit_decay([1, 2, 3], [0.0, 0.0, 0.0])
    with pytest.raises(NoSignalError):
        fit_decay([1, 2, 3], [10.0, 0.0, 0.0])


def test_decay_closed_loop_with_sampling():
    # sampled scans must bracket the true value within the fitted error bar
    cfg = MemoryConfig.from_params(SHORT, delta_tau=36.5)
    rate = 1e4 / (efficiency(SHORT, 1) * 60.0)
    hits = 0
    for seed in range(100):
        ds = run_scan(cfg, H, DecayScan(), pair_rate=rate, acquisition_s=60.0,
                      seed=3000 + seed)
        fit = fit_decay([int(r.setting_value) for r in ds.records], ds.counts())
        if abs(fit.gamma_per_cycle - 0.50) <= 3.0 * fit.sigma_gamma:
            hits += 1
    assert hits >= 97


# --- loss budget ---

def improved_parts(length_m=0.5):
    return [
        ComponentSpec(COUPLER, 0.96), ComponentSpec(COUPLER, 0.96),
        ComponentSpec(COUPLER, 0.96),
        ComponentSpec(CIRCULATOR_ARM, 0.98),
        ComponentSpec(POCKELS_CELL, 0.99),
        ComponentSpec(FIBER_SEGMENT, length_m=length_m, atten_db_per_km=4.0),
        ComponentSpec(RETROREFLECTOR, 0.98),
        ComponentSpec(FPC),
    ]


def test_budget_improved_inventory():
    report = project_budget(improved_parts(), delta_tau=36.5)
    assert 0.88 <= report.per_cycle <= 0.92
    assert report.per_cycle == pytest.approx(0.8933131691485515, rel=1e-12)
    assert report.eta_table[0] == pytest.approx(report.params.g13, rel=1e-12)


def test_budget_eta_table_consistency():
    report = project_budget(improved_parts(), delta_tau=36.5, n_max=6)
    assert len(report.eta_table) == 7
    for n, eta in enumerate(report.eta_table):
        assert eta == pytest.approx(efficiency(report.params, n), rel=1e-12)


def test_budget_wavelength_replaces_attenuation():
    report = project_budget(improved_parts(5000.0), delta_tau=25000.0,
                            wavelength_nm=780.0)
    assert report.fiber_factor == pytest.approx(1e-4, rel=1e-12)
    swapped = project_budget(improved_parts(5000.0), delta_tau=25000.0,
                             wavelength_nm=1550.0)
    assert swapped.fiber_factor == pytest.approx(10 ** -0.2, rel=1e-12)
    assert swapped.per_cycle > report.per_cycle


def test_budget_accepts_config_and_lifetime_fields():
    cfg = route_inventory(improved_parts(), 36.5)
    report = project_budget(cfg)
    assert report.delta_tau == 36.5
    assert report.lifetime_time_1e_ns == pytest.approx(
        report.lifetime_cycles_1e * 36.5, rel=1e-12)
    assert report.lifetime_cycles_1e == pytest.approx(
        -1.0 / math.log(report.per_cycle), rel=1e-12)


def test_budget_validation():
    with pytest.raises(ValueError):
        project_budget(improved_parts())  # flat list needs delta_tau
    with pytest.raises(ValueError):
        project_budget(improved_parts(), delta_tau=36.5, n_max=-1)
    with pytest.raises(ValueError):
        project_budget(improved_parts(), delta_tau=36.5, wavelength_nm=1310.0)


def test_route_inventory_extra_coupler_is_connector():
    parts = improved_parts() + [ComponentSpec(COUPLER, 0.85)]
    cfg = route_inventory(parts, 36.5)
    assert sum(1 for c in cfg.delay_zone if c.kind == COUPLER) == 1
    worse = project_budget(cfg)
    base = project_budget(route_inventory(improved_parts(), 36.5))
    assert worse.per_cycle == pytest.approx(base.per_cycle * 0.85, rel=1e-12)


def test_route_inventory_validation():
    with pytest.raises(TypeError):
        ComponentSpec("BEAM_BLOCK", 0.5)  # unplaceable kinds never construct
    with pytest.raises(SchemaError) as err:
        route_inventory(improved_parts()[1:], 36.5)  # only two couplers
    assert err.value.field == "inventory"
    no_delay = [p for p in improved_parts() if p.kind not in
                (FIBER_SEGMENT, RETROREFLECTOR, FPC)]
    with pytest.raises(SchemaError):
        route_inventory(no_delay, 36.5)


# --- scalar helpers ---

def test_attenuation_defaults():
    assert default_attenuation_db_per_km(780) == 4.0
    assert default_attenuation_db_per_km(1550) == 0.2
    with pytest.raises(ValueError):
        default_attenuation_db_per_km(633)


def test_lifetime_values():
    assert lifetime_1e(0.99) == pytest.approx(99.49916247342207, rel=1e-12)
    assert lifetime_1e(1.0) == math.inf
    assert lifetime_1e(math.exp(-1.0)) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        lifetime_1e(0.0)
    with pytest.raises(ValueError):
        lifetime_1e(1.2)


def test_fiber_transmission_reference_points():
    assert fiber_transmission(50.0, 4.0, round_trip=True) == pytest.approx(
        0.9120108393559098, rel=1e-12)
    assert fiber_transmission(5000.0, 0.2, round_trip=True) == pytest.approx(
        0.6309573444801932, rel=1e-12)


def test_visibility_matches_synth_datasets():
    for vis in (0.7646, 0.8609, 1.0):
        ds = synth_malus_dataset(ANGLES, 2e4 / (1 + vis), vis, 0.3, seed=None)
        fit = fit_malus(ds.values(), ds.counts())
        assert fit.visibility == pytest.approx(vis, abs=1e-9)
