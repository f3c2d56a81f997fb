from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import spearmanr

from oracles import empc_grid_oracle, empc_micro_instance

from invfor.errors import ConfigError, UnstableBase
from invfor.simulator import (
    FLEX, NO_FLEX, BuildingParams, BuildingState, build_dataset, building_from_file,
    comfort_band, empc_schedule, generate_population, read_parameter_file, simulate_building,
    state_step, synthetic_inputs,
)


@pytest.fixture(scope="module")
def base():
    return building_from_file()


def _weather(H, temp=0.0, solar=0.0):
    return np.column_stack([np.full(H, temp), np.full(H, solar)])


# -- dynamics --------------------------------------------------------------------


def test_zero_state_stays_zero(base):
    assert np.allclose(state_step(np.zeros(3), 0.0, [0.0, 0.0], base), 0.0)


def test_step_arithmetic():
    p = BuildingParams(0.5 * np.eye(3), [1.0, 0.0, 0.0], np.zeros((3, 2)))
    assert np.allclose(state_step([2.0, 0.0, 0.0], 1.0, [0.0, 0.0], p), [2.0, 0.0, 0.0])
    s = state_step(BuildingState(2.0, 0.0, 0.0), 1.0, [0.0, 0.0], p)
    assert s == BuildingState(2.0, 0.0, 0.0)


def test_steady_state_after_many_steps(base):
    x, z = 1.7, np.array([-3.0, 40.0])
    y = np.zeros(3)
    for _ in range(10_000):
        y = state_step(y, x, z, base)
    assert np.max(np.abs(y - base.steady_state(x, z))) <= 1e-6


def test_default_building_is_stable(base):
    assert base.spectral_radius < 1
    # Heating raises every temperature; a warmer outside does too.
    assert np.all(base.steady_state(1.0, [0.0, 0.0]) > 0)
    assert np.all(base.steady_state(0.0, [1.0, 0.0]) > 0)


def test_params_validation():
    with pytest.raises(ConfigError):
        BuildingParams(np.eye(3) * 0.5, np.ones(3), np.zeros((3, 2)), x_max=0.0)
    with pytest.raises(ConfigError):
        BuildingParams(np.eye(3) * 0.5, np.ones(3), np.zeros((3, 2)), y_min=22.0, y_max=21.0)


# -- EMPC ------------------------------------------------------------------------


def test_satisfied_band_needs_no_heating(base):
    y0 = np.full(3, 21.0)
    plan = empc_schedule(base, np.full(24, 0.3), _weather(24, temp=21.0), y0, 24,
                         y_min=10.0, y_max=30.0)
    assert np.all(plan.x == 0.0)
    assert plan.objective == 0.0


def test_vanishing_penalty_means_no_heating(base):
    p = replace(base, rho=0.0)
    plan = empc_schedule(p, np.full(12, 0.3), _weather(12, temp=-10.0), np.full(3, 15.0), 12,
                         y_min=21.0, y_max=21.0)
    assert np.all(plan.x == 0.0)


def _holding_power(params, z, room=21.0):
    M = np.linalg.inv(np.eye(3) - params.A)
    return (room - (M @ params.Em @ z)[0]) / (M @ params.Bm)[0]


def test_large_penalty_tracks_setpoint_exactly(base):
    # From the fixed point that holds 21 degC, tracking is feasible and the
    # penalty dwarfs any energy cost, so no violation is accepted.
    z = np.array([-2.0, 0.0])
    y0 = base.steady_state(_holding_power(base, z), z)
    assert base.rho > 10 * 0.5 * base.x_max
    plan = empc_schedule(base, np.full(24, 0.5), np.tile(z, (24, 1)), y0, 24,
                         y_min=21.0, y_max=21.0)
    assert plan.violations.sum() == pytest.approx(0.0, abs=1e-7)


def test_free_heating_removes_violations_up_to_saturation():
    for seed in range(10):
        p, y0, _, w, lo, hi = empc_micro_instance(seed)
        zero = np.zeros(3)
        plan = empc_schedule(p, zero, w, y0, 3, lo, hi)
        best, _ = empc_grid_oracle(p.A, p.Bm, p.Em, y0, zero, w, lo, hi, p.x_max, p.rho)
        assert plan.objective == pytest.approx(best, abs=1e-6)


@pytest.mark.parametrize("seed", range(20))
def test_plan_matches_grid_oracle(seed):
    p, y0, prices, w, lo, hi = empc_micro_instance(seed)
    plan = empc_schedule(p, prices, w, y0, 3, lo, hi)
    best, _ = empc_grid_oracle(p.A, p.Bm, p.Em, y0, prices, w, lo, hi, p.x_max, p.rho)
    assert abs(plan.objective - best) <= 1e-4


def test_plan_respects_box_and_dynamics(base):
    rng = np.random.default_rng(0)
    prices = rng.uniform(0.05, 0.5, 24)
    w = np.column_stack([rng.uniform(-8, 2, 24), rng.uniform(0, 60, 24)])
    y0 = np.array([20.5, 21.0, 30.0])
    plan = empc_schedule(base, prices, w, y0, 24, y_min=20.0, y_max=22.0)
    assert np.all(plan.x >= 0.0) and np.all(plan.x <= base.x_max)
    y = y0
    for t in range(24):
        y = state_step(y, plan.x[t], w[t], base)
        assert np.allclose(y, plan.states[t + 1], atol=1e-9)
    room = plan.states[1:, 0]
    assert np.allclose(plan.violations, np.maximum(0, np.maximum(20.0 - room, room - 22.0)))


def test_highs_and_simplex_agree_on_empc(base):
    rng = np.random.default_rng(1)
    prices = rng.uniform(0.05, 0.5, 8)
    w = _weather(8, temp=-2.0)
    y0 = np.array([20.0, 20.5, 25.0])
    a = empc_schedule(base, prices, w, y0, 8, 20.0, 22.0, method="highs")
    b = empc_schedule(base, prices, w, y0, 8, 20.0, 22.0, method="simplex")
    assert a.objective == pytest.approx(b.objective, abs=1e-7)


def test_bad_horizon(base):
    with pytest.raises(ValueError):
        empc_schedule(base, [0.1], _weather(1), np.zeros(3), 0)
    with pytest.raises(ValueError):
        empc_schedule(base, [0.1, 0.2], _weather(1), np.zeros(3), 2)


# -- closed loop -----------------------------------------------------------------


def test_no_flex_load_settles_at_balance_power(base):
    z = np.array([-2.0, 0.0])
    N = 400
    load, room = simulate_building(base, np.full(N + 24, 0.3), np.tile(z, (N + 24, 1)),
                                   21.0, 21.0, 24, n_hours=N)
    need = _holding_power(base, z)
    assert load[-1] == pytest.approx(need, abs=1e-6)
    assert room[-1] == pytest.approx(21.0, abs=1e-6)


def test_comfort_bands():
    hours = np.arange(24)
    lo, hi = comfort_band(NO_FLEX, hours)
    assert np.all(lo == 21.0) and np.all(hi == 21.0)
    lo, hi = comfort_band(FLEX, hours, band=2.0)
    assert np.all(lo == 20.0) and np.all(hi == 22.0)
    lo, _ = comfort_band(FLEX, hours, night_setback=3.0)
    assert lo[2] == 17.0 and lo[12] == 20.0
    with pytest.raises(ValueError):
        comfort_band("other", hours)


# -- fleet -----------------------------------------------------------------------


def test_population_is_deterministic(base):
    a = generate_population(base, 5, seed=3)
    b = generate_population(base, 5, seed=3)
    assert all(np.array_equal(x.A, y.A) for x, y in zip(a, b))
    c = generate_population(base, 5, seed=4)
    assert not np.array_equal(a[0].A, c[0].A)


def test_zero_scale_copies_base(base):
    fleet = generate_population(base, 4, perturbation=0.0, seed=1)
    assert len(fleet) == 4
    assert all(np.array_equal(b.A, base.A) for b in fleet)


def test_perturbation_keeps_signs_rows_and_stability(base):
    fleet = generate_population(base, 200, seed=2)
    rows = base.A.sum(axis=1)
    for b in fleet:
        assert b.spectral_radius < 1
        assert np.all(np.sign(b.A) == np.sign(base.A))
        assert np.allclose(b.A.sum(axis=1), rows, atol=1e-12)


def test_perturbation_variance(base):
    fleet = generate_population(base, 4000, seed=5)
    d = np.array([b.A[0, 1] for b in fleet]) - base.A[0, 1]
    assert np.mean(d) == pytest.approx(0.0, abs=0.01)
    assert np.var(d) == pytest.approx(abs(base.A[0, 1]) / 50, rel=0.1)


def test_unstable_base_rejected():
    bad = BuildingParams(np.eye(3) * 1.01, np.ones(3), np.zeros((3, 2)))
    with pytest.raises(UnstableBase):
        generate_population(bad, 2)


def _inputs(n, seed=0):
    return synthetic_inputs(n, seed=seed)


def test_empty_fleet_gives_zero_load():
    out = build_dataset([], _inputs(30), FLEX, horizon=6, n_hours=24)
    assert len(out) == 24 and np.all(out.load == 0.0)


def test_dataset_columns_and_burn_in(base):
    inp = _inputs(40)
    out = build_dataset([base], inp, NO_FLEX, horizon=6, burn_in=4, n_hours=30,
                        per_building=True)
    assert len(out) == 26
    assert out.timestamps[0] == inp.timestamps[4]
    assert np.allclose(out.extra["load_b000"], out.load)
    with pytest.raises(ConfigError):
        build_dataset([base], inp, NO_FLEX, n_hours=50)


def test_parallel_aggregate_matches_serial(base):
    fleet = generate_population(base, 3, seed=0)
    inp = _inputs(40)
    a = build_dataset(fleet, inp, FLEX, horizon=8, n_hours=24)
    b = build_dataset(fleet, inp, FLEX, horizon=8, n_hours=24, n_jobs=2)
    assert np.array_equal(a.load, b.load)


@pytest.fixture(scope="module")
def two_modes(base):
    fleet = generate_population(replace(base, x_max=2.0), 3, seed=0)
    inp = synthetic_inputs(24 * 9 + 24, seed=1)
    return {m: build_dataset(fleet, inp, m, horizon=24, burn_in=24, n_hours=24 * 9)
            for m in (FLEX, NO_FLEX)}


def test_flex_load_reacts_to_price(two_modes):
    rho = {m: spearmanr(t.price, t.load)[0] for m, t in two_modes.items()}
    assert rho[FLEX] < rho[NO_FLEX]


def test_flex_heats_more_in_cheap_hours(two_modes):
    t = two_modes[FLEX]
    q1, q3 = np.quantile(t.price, [0.25, 0.75])
    assert t.load[t.price <= q1].mean() >= t.load[t.price >= q3].mean()


# -- inputs and parameter files ----------------------------------------------------


def test_synthetic_inputs_are_seeded():
    a, b = synthetic_inputs(72, seed=3), synthetic_inputs(72, seed=3)
    assert np.array_equal(a.price, b.price) and np.array_equal(a.temp_ambient, b.temp_ambient)
    assert np.all(a.solar >= 0) and np.all(a.price > 0)
    assert not np.array_equal(a.price, synthetic_inputs(72, seed=4).price)


def test_parameter_file_round_trip(tmp_path):
    doc = read_parameter_file()
    assert doc["A"].shape == (3, 3) and doc["E"].shape == (3, 2)
    f = tmp_path / "b.txt"
    f.write_text("A = 0.5 0 0 ; 0 0.5 0 ; 0 0 0.5\nB = 1 ; 0 ; 0\nE = 0 0 ; 0 0 ; 0 0\n"
                 "x_max = 3  # kW\n")
    p = building_from_file(f)
    assert p.x_max == 3.0 and np.allclose(p.A, 0.5 * np.eye(3))


@pytest.mark.parametrize("text", ["A = 1 2 ; 3\nB = 1;0;0\nE = 0 0;0 0;0 0",
                                  "B = 1 ; 0 ; 0\nE = 0 0 ; 0 0 ; 0 0",
                                  "A = 0.5 0 0 ; 0 0.5 0 ; 0 0 0.5\nB = 1;0;0\nE = 0 0;0 0;0 0\nrho",
                                  "A = x\nB = 1;0;0\nE = 0 0;0 0;0 0"])
def test_malformed_parameter_files(tmp_path, text):
    f = tmp_path / "bad.txt"
    f.write_text(text)
    with pytest.raises(ConfigError):
        building_from_file(f)


def test_missing_parameter_file(tmp_path):
    with pytest.raises(ConfigError):
        read_parameter_file(tmp_path / "nope.txt")
