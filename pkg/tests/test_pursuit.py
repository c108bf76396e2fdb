import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from d2dspl import (
    AircraftState,
    DiscretizationScheme,
    McGrewParams,
    OpponentScript,
    PursuitAction,
    PursuitConfig,
    PursuitDiscretizer,
    PursuitEnv,
    ScriptSegment,
    bundled_scenario,
    discretize_pursuit,
    load_script,
    mcgrew_angular,
    mcgrew_range,
    mcgrew_score,
    pursuit_reward,
    pursuit_step,
    relative_geometry,
    save_script,
    spawn_training_episode,
)
from d2dspl.pursuit import BLUE_START, RED_TRAINING_START, straight_training_script

BLUE = AircraftState(0, 0, 0, 125)

aircraft = st.builds(
    AircraftState,
    x=st.floats(-20_000, 20_000),
    y=st.floats(-20_000, 20_000),
    heading=st.floats(0, 360, exclude_max=True),
    speed=st.floats(50, 400),
)


# --- relative geometry -------------------------------------------------------


def test_tail_chase_geometry():
    g = relative_geometry(BLUE, AircraftState(1000, 0, 0, 125))
    assert (g.range_m, g.aa, g.ata, g.speed_diff) == (1000.0, 0.0, 0.0, 0.0)


def test_head_on_geometry():
    g = relative_geometry(BLUE, AircraftState(1000, 0, 180, 125))
    assert g.aa == 180.0 and g.ata == 0.0


def test_perpendicular_nose_geometry():
    g = relative_geometry(AircraftState(0, 0, 90, 125), AircraftState(1000, 0, 0, 125))
    assert g.ata == 90.0 and g.aa == 0.0


def test_speed_difference_sign():
    g = relative_geometry(AircraftState(0, 0, 0, 140), AircraftState(500, 0, 0, 110))
    assert g.speed_diff == 30.0


def test_coincident_aircraft_rejected():
    with pytest.raises(ValueError):
        relative_geometry(BLUE, AircraftState(0, 0, 90, 200))


@given(aircraft, aircraft)
def test_geometry_swap_consistency(a, b):
    if math.hypot(a.x - b.x, a.y - b.y) < 1e-6:
        return
    g_ab = relative_geometry(a, b)
    g_ba = relative_geometry(b, a)
    assert g_ab.range_m == pytest.approx(g_ba.range_m, rel=1e-12)
    # each side's nose angle to the LOS: my ATA is 180 minus your AA
    assert g_ba.ata == pytest.approx(180.0 - g_ab.aa, abs=1e-9)
    assert g_ba.aa == pytest.approx(180.0 - g_ab.ata, abs=1e-9)
    assert g_ba.speed_diff == -g_ab.speed_diff


@given(aircraft, aircraft)
def test_geometry_angle_ranges(a, b):
    if math.hypot(a.x - b.x, a.y - b.y) < 1e-6:
        return
    g = relative_geometry(a, b)
    assert 0.0 <= g.aa <= 180.0
    assert 0.0 <= g.ata <= 180.0
    assert g.range_m > 0.0


# --- McGrew scoring ----------------------------------------------------------


def test_angular_score_values():
    assert mcgrew_angular(0, 0) == 1.0
    assert mcgrew_angular(180, 180) == 0.0
    assert mcgrew_angular(60, 30) == 0.75


def test_angular_score_rejects_out_of_range():
    with pytest.raises(ValueError):
        mcgrew_angular(-1, 0)
    with pytest.raises(ValueError):
        mcgrew_angular(0, 180.5)


def test_range_score_values():
    assert mcgrew_range(380.0) == 1.0
    assert mcgrew_range(1280.0) == pytest.approx(math.exp(-1), abs=1e-12)
    assert mcgrew_range(0.0) == pytest.approx(math.exp(-380 / 900), abs=1e-12)


def test_range_score_symmetric_about_desired_range():
    for d in (10, 100, 250, 380):
        assert mcgrew_range(380 + d) == mcgrew_range(380 - d)


def test_combined_score_and_reward():
    g = lambda aa, ata, r: relative_geometry(
        AircraftState(0, 0, 0, 125), AircraftState(r, 0, 0, 125)
    )
    geom = relative_geometry(BLUE, AircraftState(380, 0, 0, 125))
    assert mcgrew_score(geom) == 1.0
    assert pursuit_reward(geom) == 0.5
    geom = relative_geometry(BLUE, AircraftState(1280, 0, 0, 125))
    assert mcgrew_score(geom) == pytest.approx(math.exp(-1), abs=1e-12)
    assert pursuit_reward(geom) == pytest.approx(math.exp(-1) - 0.5, abs=1e-12)


def test_score_is_product_of_components():
    rng = np.random.default_rng(0)
    from d2dspl.pursuit import RelativeGeometry

    for _ in range(500):
        geom = RelativeGeometry(rng.uniform(0, 5000), rng.uniform(0, 180),
                                rng.uniform(0, 180), rng.uniform(-100, 100))
        expected = mcgrew_angular(geom.aa, geom.ata) * mcgrew_range(geom.range_m)
        assert mcgrew_score(geom) == pytest.approx(expected, abs=1e-12)
        assert 0.0 <= mcgrew_score(geom) <= 1.0


def test_angular_score_monotone_in_each_angle():
    for fixed in (0.0, 45.0, 180.0):
        scores = [mcgrew_angular(aa, fixed) for aa in np.linspace(0, 180, 50)]
        assert all(b <= a for a, b in zip(scores, scores[1:]))
        scores = [mcgrew_angular(fixed, ata) for ata in np.linspace(0, 180, 50)]
        assert all(b <= a for a, b in zip(scores, scores[1:]))


def test_perfect_score_only_at_desired_range_on_the_tail():
    assert mcgrew_score(relative_geometry(BLUE, AircraftState(380, 0, 0, 125))) == 1.0
    assert mcgrew_score(relative_geometry(BLUE, AircraftState(381, 0, 0, 125))) < 1.0


# --- stepping ----------------------------------------------------------------


def test_do_nothing_advances_along_heading():
    blue, red, out = pursuit_step(BLUE, AircraftState(1000, 300, 50, 125),
                                  PursuitAction.DO_NOTHING, straight_training_script(), 0)
    assert (blue.x, blue.y) == (62.5, 0.0)
    assert blue.heading == 0.0 and blue.speed == 125.0
    assert not out.terminal


def test_turn_left_is_counter_clockwise_before_advance():
    blue, _, _ = pursuit_step(BLUE, AircraftState(1000, 300, 50, 125),
                              PursuitAction.TURN_LEFT, straight_training_script(), 0)
    assert blue.heading == 10.0
    assert blue.x == pytest.approx(62.5 * math.cos(math.radians(10)))
    assert blue.y == pytest.approx(62.5 * math.sin(math.radians(10)))
    blue, _, _ = pursuit_step(BLUE, AircraftState(1000, 300, 50, 125),
                              PursuitAction.TURN_RIGHT, straight_training_script(), 0)
    assert blue.heading == 350.0


def test_speed_actions_scale_and_clamp():
    red = AircraftState(1000, 300, 50, 125)
    script = straight_training_script()
    blue, _, _ = pursuit_step(BLUE, red, PursuitAction.SPEED_UP, script, 0)
    assert blue.speed == pytest.approx(137.5)
    blue, _, _ = pursuit_step(BLUE, red, PursuitAction.SLOW_DOWN, script, 0)
    assert blue.speed == pytest.approx(112.5)
    fast = AircraftState(0, 0, 0, 395)
    blue, _, _ = pursuit_step(fast, red, PursuitAction.SPEED_UP, script, 0)
    assert blue.speed == 400.0
    slow = AircraftState(0, 0, 0, 52)
    blue, _, _ = pursuit_step(slow, red, PursuitAction.SLOW_DOWN, script, 0)
    assert blue.speed == 50.0


def test_invalid_action_rejected():
    with pytest.raises(ValueError):
        pursuit_step(BLUE, RED_TRAINING_START, 7, straight_training_script(), 0)


def test_reward_comes_from_post_move_geometry():
    red = AircraftState(1000, 300, 50, 125)
    blue2, red2, out = pursuit_step(BLUE, red, PursuitAction.DO_NOTHING,
                                    straight_training_script(), 0)
    assert out.reward == pytest.approx(pursuit_reward(relative_geometry(blue2, red2)), abs=1e-15)
    assert np.array_equal(out.next_state, relative_geometry(blue2, red2).as_vector())


def test_terminal_exactly_at_step_limit():
    cfg = PursuitConfig(max_steps=5)
    blue, red = BLUE, RED_TRAINING_START
    script = straight_training_script()
    for t in range(5):
        blue, red, out = pursuit_step(blue, red, PursuitAction.DO_NOTHING, script, t, cfg)
    assert out.terminal
    with pytest.raises(ValueError):
        pursuit_step(blue, red, PursuitAction.DO_NOTHING, script, 5, cfg)


def test_scripted_red_turns_and_accelerates():
    script = OpponentScript(
        AircraftState(0, 1000, 0, 100),
        (ScriptSegment(0, 0.0, 0.0), ScriptSegment(2, 5.0, 0.1)),
    )
    red = script.initial
    blue = BLUE
    for t in range(4):
        blue, red, _ = pursuit_step(blue, red, PursuitAction.DO_NOTHING, script, t)
    # two straight steps, then two turning/accelerating steps
    assert red.heading == pytest.approx(10.0)
    assert red.speed == pytest.approx(100 * 1.1 * 1.1)


def test_episode_reward_total_within_bounds():
    env = PursuitEnv()
    env.reset(np.random.default_rng(0))
    total = 0.0
    rng = np.random.default_rng(1)
    while not env.terminal:
        total += env.step(int(rng.integers(5))).reward
    assert env.steps == 700
    assert -350.0 <= total <= 350.0
    assert 0.0 <= env.episode_score(total, env.steps) <= 1.0


# --- spawning ----------------------------------------------------------------


def test_zero_jitter_spawn_is_nominal():
    blue, red, script = spawn_training_episode(np.random.default_rng(0), 0.0, 0.0)
    assert blue == BLUE_START
    assert red == RED_TRAINING_START
    assert script.rates_at(0) == (0.0, 0.0)
    assert script.rates_at(699) == (0.0, 0.0)


def test_spawn_jitter_bounds_and_determinism():
    for seed in range(20):
        _, red, _ = spawn_training_episode(np.random.default_rng(seed))
        assert abs(red.x - 1500) <= 50 and abs(red.y - 300) <= 50
        assert abs(red.heading - 50) <= 5
        assert red.speed == 125.0
    a = spawn_training_episode(np.random.default_rng(5))[1]
    b = spawn_training_episode(np.random.default_rng(5))[1]
    assert a == b


def test_env_reset_perturbs_red_around_scenario_start():
    env = PursuitEnv(pos_jitter=0.0, heading_jitter=0.0)
    env.reset(np.random.default_rng(0))
    assert env.red == RED_TRAINING_START
    assert env.blue == BLUE_START


# --- scripts on disk ---------------------------------------------------------


def test_script_round_trip(tmp_path):
    script = OpponentScript(
        AircraftState(1500.5, -300.25, 123.456, 130.0),
        (ScriptSegment(0, 0.5, 0.0), ScriptSegment(100, -1.25, 0.01)),
    )
    path = tmp_path / "scenario.txt"
    save_script(script, path)
    loaded = load_script(path)
    assert loaded == script


def test_script_rejects_unsorted_segments():
    with pytest.raises(ValueError):
        OpponentScript(BLUE, (ScriptSegment(10, 0, 0), ScriptSegment(5, 0, 0)))


def test_script_parse_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("1 2 3\n")  # header too short
    with pytest.raises(ValueError):
        load_script(bad)
    bad.write_text("")
    with pytest.raises(ValueError):
        load_script(bad)


def test_bundled_scenarios_load_and_differ():
    names = ("straight", "gentle_turn", "s_turn", "u_turn")
    scripts = [bundled_scenario(n) for n in names]
    for s in scripts:
        assert s.initial == RED_TRAINING_START
    assert scripts[0].rates_at(100) == (0.0, 0.0)
    assert scripts[1].rates_at(100)[0] > 0
    assert scripts[2].rates_at(300)[0] < 0 < scripts[2].rates_at(100)[0]
    assert scripts[3].rates_at(100)[0] == 0.0 and scripts[3].rates_at(250)[0] > 0
    with pytest.raises(ValueError):
        bundled_scenario("nope")


# --- discretization ----------------------------------------------------------


def test_flat_index_example():
    assert discretize_pursuit((380.0, 0.0, 0.0, 0.0)) == 3005


def test_flat_index_accepts_geometry():
    geom = relative_geometry(BLUE, AircraftState(380, 0, 0, 125))
    assert discretize_pursuit(geom) == 3005


def test_extreme_range_clamps_into_last_bin():
    for aa, ata, dv in [(0, 0, 0), (90, 10, -5), (180, 180, 999)]:
        idx = discretize_pursuit((1e15, aa, ata, dv))
        assert idx // 1000 == 13


def test_index_monotone_in_range():
    rng = np.random.default_rng(2)
    for _ in range(50):
        aa, ata, dv = rng.uniform(0, 180), rng.uniform(0, 180), rng.uniform(-60, 60)
        radii = np.sort(rng.uniform(0, 5000, size=40))
        idx = [discretize_pursuit((r, aa, ata, dv)) for r in radii]
        assert all(b >= a for a, b in zip(idx, idx[1:]))


def test_default_scheme_shape():
    scheme = DiscretizationScheme.default()
    assert scheme.bins == (14, 10, 10, 10)
    assert scheme.n_states == 14_000


def test_reduced_scheme_shape():
    scheme = DiscretizationScheme.with_bins(7, 5, 5, 5)
    assert scheme.bins == (7, 5, 5, 5)
    assert scheme.n_states == 875
    disc = PursuitDiscretizer(scheme)
    assert disc((1e9, 180, 180, 100)) == 874


def test_scheme_rejects_bad_edges():
    with pytest.raises(ValueError):
        DiscretizationScheme((1, 1), (10,), (10,), (0,))
    with pytest.raises(ValueError):
        DiscretizationScheme((), (10,), (10,), (0,))


def test_constant_within_cells():
    scheme = DiscretizationScheme.default()
    disc = PursuitDiscretizer(scheme)
    rng = np.random.default_rng(3)
    r_edges = (0.0,) + scheme.range_edges + (5000.0,)
    aa_edges = (0.0,) + scheme.aa_edges + (180.0,)
    dv_edges = (-60.0,) + scheme.dv_edges + (60.0,)
    for _ in range(300):
        rb = rng.integers(14)
        ab = rng.integers(10)
        tb = rng.integers(10)
        db = rng.integers(10)
        pts = []
        for _ in range(2):
            pts.append((
                rng.uniform(r_edges[rb], r_edges[rb + 1]),
                rng.uniform(aa_edges[ab], aa_edges[ab + 1]),
                rng.uniform(aa_edges[tb], aa_edges[tb + 1]),
                rng.uniform(dv_edges[db], dv_edges[db + 1]),
            ))
        assert disc(pts[0]) == disc(pts[1]) == rb * 1000 + ab * 100 + tb * 10 + db


def test_batch_indices_match_scalar():
    disc = PursuitDiscretizer()
    rng = np.random.default_rng(4)
    states = np.column_stack([
        rng.uniform(0, 5000, 400),
        rng.uniform(0, 180, 400),
        rng.uniform(0, 180, 400),
        rng.uniform(-80, 80, 400),
    ])
    assert np.array_equal(disc.indices_batch(states), [disc(s) for s in states])


@settings(max_examples=50)
@given(st.floats(0, 1e6), st.floats(0, 180), st.floats(0, 180), st.floats(-500, 500))
def test_index_always_in_range(r, aa, ata, dv):
    assert 0 <= discretize_pursuit((r, aa, ata, dv)) < 14_000
