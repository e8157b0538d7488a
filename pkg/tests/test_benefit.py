import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import charge, snapshot, task, uav, vehicle, worker
from crowdsched.benefit import (
    ChargeBenefit,
    Role,
    TaskBenefit,
    assign_role,
    assign_roles,
    charge_reward,
    choose_role,
    estimate_charge_benefit,
    estimate_task_benefit,
    task_reward,
)
from crowdsched.world import OnlineWindow

pos = st.floats(0.01, 60, allow_nan=False)
left = st.floats(-100, 200, allow_nan=False)


def test_task_reward_hand_values():
    assert task_reward(30, 60, 9, 30) == pytest.approx(0.85)
    assert task_reward(0, 60, 9, 30) == pytest.approx(1.0)
    # uav sitting on the task: only the cost counts
    assert task_reward(30, 60, 3, 30) == pytest.approx(0.95)


def test_charge_reward_hand_values():
    assert charge_reward(30, 60, 30 - 12, 30) == pytest.approx(0.3)
    assert charge_reward(30, 60, 0, 30) == 0.0
    assert charge_reward(-5, 60, 18, 30) == 0.0


@given(left, pos, st.floats(0, 30), st.floats(0, 30))
def test_rewards_stay_in_unit_interval(lt, window, pow_sum, deficit):
    assert 0.0 <= task_reward(lt, window, pow_sum, 30.0) <= 1.0
    assert 0.0 <= charge_reward(lt, window, deficit, 30.0) <= 1.0


@given(st.floats(0.1, 59), st.floats(0, 29), st.floats(0.01, 1))
def test_task_reward_strictly_decreasing_in_power_spent(lt, a, step):
    assert task_reward(lt, 60, a + step, 30) < task_reward(lt, 60, a, 30)


@given(st.floats(0.1, 59), st.floats(0, 29), st.floats(0.01, 1))
def test_charge_reward_strictly_increasing_in_deficit(lt, a, step):
    assert charge_reward(lt, 60, a + step, 30) > charge_reward(lt, 60, a, 30)


def test_task_benefit_fields_follow_geometry():
    # uav at origin, task 3 km east, worker 2 km beyond it; window [0, 60)
    s = snapshot([uav(0, 0, 0)], [worker(0, 5, 0)], [], [task(0, 3, 0, cost=3)], [charge(0, 3, 4)])
    b = estimate_task_benefit(s.uavs[0], s)
    assert (b.target_task, b.partner_worker) == (0, 0)
    assert b.delta_pow_t == pytest.approx(3)
    assert b.worker_time == pytest.approx(4)            # 2 km at 0.5 km/min
    assert b.task_time == pytest.approx(4 + 3)          # wait for worker, then 3 km of cost at 1 km/min
    assert b.left_t == pytest.approx(60 - 7)
    assert b.pow_sum_t == pytest.approx(6)
    assert b.reward == pytest.approx(1 - (53 / 60) * (6 / 30))


def test_charge_benefit_fields_follow_geometry():
    # uav 4 km from the charge point with power 12; vehicle 3 km away at 0.8 km/min
    s = snapshot([uav(0, 0, 0, power=12)], [], [vehicle(0, 4, 3, charge_power=10)], [], [charge(0, 4, 0)])
    b = estimate_charge_benefit(s.uavs[0], s)
    assert (b.target_charge, b.partner_vehicle) == (0, 0)
    assert b.delta_pow_c == pytest.approx(4)
    assert b.vehicle_time == pytest.approx(3.75)
    # arrival power 12 - 4 = 8, so 22 km to refill at 10 km/min
    assert b.charge_time == pytest.approx(4 + 2.2)
    assert b.left_c == pytest.approx(60 - 6.2)
    assert b.pow_sum_c == pytest.approx(18)
    assert b.reward == pytest.approx((53.8 / 60) * (18 / 30))


def _task_benefit(r):
    return TaskBenefit(0, 0, 1.0, 1.0, 1.0, 4.0, 10.0, 4.0, r)


def _charge_benefit(r):
    return ChargeBenefit(0, 0, 1.0, 1.0, 1.0, 3.0, 10.0, 18.0, r)


def test_role_comparison():
    assert choose_role(_task_benefit(0.85), _charge_benefit(0.30)).role is Role.TASK
    assert choose_role(_task_benefit(0.5), _charge_benefit(0.5)).role is Role.TASK
    assert choose_role(_task_benefit(0.5), _charge_benefit(0.5 + 1e-9)).role is Role.CHARGE
    assert choose_role(None, _charge_benefit(0.0)).role is Role.CHARGE
    assert choose_role(_task_benefit(0.0), None).role is Role.TASK
    assert choose_role(None, None).role is Role.IDLE


def test_no_partner_in_range_means_idle():
    s = snapshot([uav(0, 0, 0)], [worker(0, 20, 20)], [vehicle(0, 25, 25)], [task(0, 1, 0)], [charge(0, 0, 1)])
    assert assign_role(s.uavs[0], s).role is Role.IDLE


def test_only_charge_available_gives_charge_seeker():
    s = snapshot([uav(0, 0, 0, power=5)], [], [vehicle(0, 1, 1)], [task(0, 2, 0)], [charge(0, 0, 1)])
    assert assign_role(s.uavs[0], s).role is Role.CHARGE


def test_locked_uavs_get_no_role():
    from crowdsched.nash_scheduler import Action
    u = uav(0, 0, 0)
    s = snapshot([u, uav(1, 1, 1)], [worker(0, 1, 0)], [], [task(0, 1, 0)], [charge(0, 0, 0)],
                 fixed={u.key: Action.to_task(u.key, 0)})
    assert set(assign_roles(s)) == {1}


@st.composite
def small_worlds(draw):
    n_u = draw(st.integers(1, 4))
    uavs = [uav(i, draw(pos) % 20, draw(pos) % 20, power=draw(st.floats(0, 30)),
                window=OnlineWindow(0, draw(st.floats(1, 90)))) for i in range(n_u)]
    workers = [worker(i, draw(pos) % 20, draw(pos) % 20) for i in range(draw(st.integers(0, 3)))]
    vehicles = [vehicle(i, draw(pos) % 20, draw(pos) % 20) for i in range(draw(st.integers(0, 3)))]
    tasks = [task(i, draw(pos) % 20, draw(pos) % 20) for i in range(draw(st.integers(0, 4)))]
    charges = [charge(i, draw(pos) % 20, draw(pos) % 20) for i in range(draw(st.integers(1, 3)))]
    return snapshot(uavs, workers, vehicles, tasks, charges, t=draw(st.floats(0, 0.9)))


@given(small_worlds())
def test_role_partition_is_exhaustive_exclusive_and_deterministic(s):
    roles = assign_roles(s)
    assert set(roles) == {u.id for u in s.uavs}
    for u in s.uavs:
        r = roles[u.id]
        assert r.role in (Role.TASK, Role.CHARGE, Role.IDLE)
        assert (r.benefit is None) == (r.role is Role.IDLE)
        if r.benefit is not None:
            assert 0.0 <= r.benefit.reward <= 1.0
    assert assign_roles(s) == roles


@given(small_worlds())
def test_task_targets_are_feasible(s):
    for u in s.uavs:
        b = estimate_task_benefit(u, s)
        if b is None:
            continue
        t = s.task(b.target_task)
        back = min(((t.loc.x - c.loc.x) ** 2 + (t.loc.y - c.loc.y) ** 2) ** 0.5 for c in s.charge_points)
        assert b.delta_pow_t + t.cost_power + back <= u.power + 1e-9
