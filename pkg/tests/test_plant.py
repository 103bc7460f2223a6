import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from greenscaler.errors import DomainError, EmptyInput, NonMonotonicTime
from greenscaler.plant import (Plant, PlantParams, TelemetrySample, energy_wh, initial_state,
                               plant_p95_latency, plant_power, step)

from oracles import latency_by_hand, replay_actuation, trapezoid_wh

PARAMS = PlantParams()


def test_latency_zero_load():
    for r in (1, 3, 20):
        assert plant_p95_latency(PARAMS, r, 0.0) == PARAMS.l0


def test_latency_large_replica_limit():
    assert plant_p95_latency(PARAMS, 10**9, 50.0) == pytest.approx(PARAMS.l0, rel=1e-6)


def test_latency_hand_value():
    p = PlantParams(mu=10, l0=50)
    # frozen from oracles.latency_by_hand(50, 10, 2, 10)
    assert plant_p95_latency(p, 2, 10) == pytest.approx(199.78661367769953, rel=1e-12)
    assert plant_p95_latency(p, 2, 10) == pytest.approx(latency_by_hand(50, 10, 2, 10), rel=1e-12)


def test_latency_saturates_at_cap():
    p = PlantParams(mu=10, l0=50)
    cap = latency_by_hand(50, 10, 1, 1e9)
    assert plant_p95_latency(p, 1, 10) == pytest.approx(cap)
    assert plant_p95_latency(p, 1, 1000) == pytest.approx(cap)
    assert plant_p95_latency(p, 1, 9.995) <= cap


def test_latency_domain():
    with pytest.raises(DomainError):
        plant_p95_latency(PARAMS, 0, 1.0)


def test_latency_monotone_on_grid():
    loads = np.linspace(0, 200, 81)
    grid = np.array([[plant_p95_latency(PARAMS, r, x) for x in loads] for r in range(1, 21)])
    assert np.all(np.diff(grid, axis=1) >= 0)    # non-decreasing in load
    assert np.all(np.diff(grid, axis=0) <= 0)    # non-increasing in replicas


def test_power_examples():
    pdu, host, cont = plant_power(PARAMS, 0, 0)
    assert cont == 0 and host == PARAMS.n_nodes * PARAMS.p_node_idle
    p = PlantParams(p_replica_idle=2, e_per_request=0.05)
    assert plant_power(p, 5, 100)[2] == pytest.approx(15.0, rel=1e-12)
    assert plant_power(PARAMS, 6, 0)[2] == 2 * plant_power(PARAMS, 3, 0)[2]
    assert pdu == pytest.approx(host * 1.08)


def test_step_steady_state_only_advances_time():
    s0 = initial_state(3)
    s1, sample = step(s0, PARAMS, 3, 10.0, 5.0)
    assert s1.t == 5.0 and s1.replicas_serving == 3 and s1.replicas_desired == 3
    assert s1.pending_changes == ()
    assert sample.replicas_serving == 3


def test_step_startup_delay():
    p = dataclasses.replace(PARAMS, startup_delay=10.0)
    s = initial_state(2)
    s, sample = step(s, p, 4, 10.0, 5.0)
    assert s.t == 5.0 and sample.replicas_serving == 2
    s, sample = step(s, p, 4, 10.0, 5.0)
    assert s.t == 10.0 and sample.replicas_serving == 4


def test_step_zero_load_zero_cpu():
    _, sample = step(initial_state(3), PARAMS, 3, 0.0, 5.0)
    assert sample.cpuload == 0.0


def test_step_rejects_bad_dt():
    with pytest.raises(DomainError):
        step(initial_state(1), PARAMS, 1, 1.0, 0.0)


def test_cpu_mem_swap():
    p = dataclasses.replace(PARAMS, mu=10, mem_per_replica=0.05, cpu_cap=1.0)
    s = initial_state(19)
    _, sample = step(s, p, 19, 95.0, 5.0)
    assert sample.cpuload == pytest.approx(0.5)
    assert sample.mem_used == pytest.approx(0.95)
    assert sample.swap_used == pytest.approx(0.05)
    _, sample = step(initial_state(1), p, 1, 500.0, 5.0)
    assert sample.cpuload == 1.0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 20), st.floats(0, 300)), min_size=1, max_size=40),
       st.floats(0, 0.3), st.integers(0, 10))
def test_tier_ordering(actions, sigma, seed):
    plant = Plant(dataclasses.replace(PARAMS, noise_sigma=sigma, seed=seed), replicas=1)
    for desired, load in actions:
        s = plant.step(desired, load)
        assert s.power_containers <= s.power_host <= s.power_pdu
        assert all(np.isfinite([s.p95_latency, s.cpuload, s.power_pdu]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(1, 12), min_size=1, max_size=30),
       st.sampled_from([0.0, 2.0, 5.0, 10.0, 20.0]), st.sampled_from([0.0, 2.0, 5.0]))
def test_actuation_replay(targets, startup, shutdown):
    p = dataclasses.replace(PARAMS, startup_delay=startup, shutdown_delay=shutdown)
    dt = 5.0
    plant = Plant(p, replicas=3)
    requests, seen, times = [], [], []
    for i, target in enumerate(targets):
        requests.append((i * dt, target))
        sample = plant.step(target, 1.0, dt)
        seen.append(sample.replicas_serving)
        times.append(sample.t)
    assert seen == replay_actuation(requests, startup, shutdown, 3, times)


def test_serving_tracks_desired_with_exact_delay():
    p = dataclasses.replace(PARAMS, startup_delay=10.0, shutdown_delay=5.0)
    plant = Plant(p, replicas=2)
    schedule = {0: 5, 20: 3, 40: 6, 60: 1}
    desired, serving = 2, []
    for i in range(20):
        desired = schedule.get(i * 5, desired)
        serving.append(plant.step(desired, 0.0, 5.0).replicas_serving)
    # sample i is taken at t = 5*(i+1)
    assert serving[:2] == [2, 5]          # up at t=0 -> serving at t=10
    assert serving[3:5] == [5, 3]         # down at t=20 -> serving at t=25
    assert serving[8:10] == [3, 6]        # up at t=40 -> serving at t=50
    assert serving[11:13] == [6, 1]       # down at t=60 -> serving at t=65


def test_determinism_with_noise():
    p = dataclasses.replace(PARAMS, noise_sigma=0.05, seed=42)
    runs = []
    for _ in range(2):
        plant = Plant(p, replicas=2)
        runs.append([plant.step(1 + i % 5, float(i)) for i in range(200)])
    assert runs[0] == runs[1]


def _flat(power, n, dt):
    return [TelemetrySample(t=i * dt, load=0, replicas_serving=1, p95_latency=1, cpuload=0,
                            mem_used=0, swap_used=0, power_pdu=power(i * dt),
                            power_host=power(i * dt), power_containers=power(i * dt))
            for i in range(n)]


def test_energy_examples():
    assert energy_wh(_flat(lambda t: 60.0, 361, 10.0), "pdu") == pytest.approx(60.0, rel=1e-12)
    assert energy_wh(_flat(lambda t: 18.25, 3601, 1.0)) == pytest.approx(18.25, rel=1e-12)
    ramp = _flat(lambda t: 100.0 * t / 3600.0, 361, 10.0)
    assert energy_wh(ramp) == pytest.approx(50.0, rel=1e-12)


def test_energy_matches_independent_trapezoid():
    rng = np.random.default_rng(0)
    ts = np.cumsum(rng.uniform(0.5, 10, 200))
    ps = rng.uniform(0, 500, 200)
    samples = _flat(lambda t: 0, 200, 1.0)
    samples = [dataclasses.replace(s, t=t, power_containers=p) for s, t, p in zip(samples, ts, ps)]
    assert energy_wh(samples) == pytest.approx(trapezoid_wh(ts, ps), rel=1e-12)


def test_energy_errors():
    with pytest.raises(EmptyInput):
        energy_wh([])
    s = _flat(lambda t: 1.0, 3, 1.0)
    with pytest.raises(NonMonotonicTime):
        energy_wh([s[1], s[0]])
