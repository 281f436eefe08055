import math

import numpy as np
import pytest

from radialflow.analysis import random_feeder
from radialflow.control import apply_heuristic
from radialflow.feeder import Bus, SetpointOutOfRange, SetpointProfile, validate_feeder
from radialflow.powerflow import (
    Diverged,
    SolverConfig,
    ZeroVoltage,
    balance_loss,
    forward_voltage_update,
    nodal_current,
    nodal_injection,
    solve,
    solve_batch,
    sweep_branch_currents,
    total_losses,
)

from conftest import chain


def two_bus_vmag(r, x, p, q, v0=1.0):
    """High-voltage root of |V0|^2 u = (u + A)^2 + B^2 with u = |V1|^2, A + jB = z conj(S)."""
    a = r * p + x * q
    b = x * p - r * q
    disc = (v0**2 - 2 * a) ** 2 - 4 * (a * a + b * b)
    if disc < 0:
        return None
    return math.sqrt(((v0**2 - 2 * a) + math.sqrt(disc)) / 2)


@pytest.mark.parametrize(
    "kw, q_gen, expected",
    [
        (dict(), 0.0, 0j),
        (dict(p_load=0.1, q_load=0.05, q_max=0.05), 0.05, 0.1 + 0j),
        (dict(p_load=0.2, p_gen=0.15, q_load=0.08, q_max=0.1), 0.03, 0.05 + 0.05j),
    ],
)
def test_nodal_injection(kw, q_gen, expected):
    got = nodal_injection(Bus(1, 0, **kw), q_gen)
    assert got == pytest.approx(expected, abs=1e-15)


def test_nodal_injection_out_of_range():
    with pytest.raises(SetpointOutOfRange):
        nodal_injection(Bus(1, 0, q_max=0.05), 0.06)


def test_nodal_current_values():
    assert nodal_current(0j, 1 + 0j) == 0j
    assert nodal_current(0.1 + 0.05j, 1 + 0j) == pytest.approx(0.1 - 0.05j)
    # frozen from a real-arithmetic division/conjugation oracle
    v = 0.98 * complex(math.cos(-0.01), math.sin(-0.01))
    got = nodal_current(0.05 + 0.02j, v)
    assert got.real == pytest.approx(0.05081377893280605, abs=1e-15)
    assert got.imag == pytest.approx(-0.02091733844392004, abs=1e-15)


def test_nodal_current_zero_voltage():
    with pytest.raises(ZeroVoltage):
        nodal_current(0.1 + 0j, 0j)


def test_sweep_chain():
    feeder = chain({}, {})
    i = np.array([0, 0.1 - 0.02j, 0.05 + 0.01j])
    ibr = sweep_branch_currents(i, feeder)
    assert ibr[2] == i[2]
    assert ibr[1] == i[1] + i[2]
    assert ibr[0] == 0
    assert not sweep_branch_currents(np.zeros(3, complex), feeder).any()


def kcl_oracle(feeder, currents):
    """Dense solve of: I_br[k] - sum(I_br[children of k]) = I[k] for non-slack k."""
    nodes = [b.id for b in feeder.buses if not b.is_slack]
    idx = {b: k for k, b in enumerate(nodes)}
    m = np.zeros((len(nodes), len(nodes)), dtype=complex)
    for b in feeder.buses:
        if b.is_slack:
            continue
        m[idx[b.id], idx[b.id]] = 1
        if b.parent in idx:
            m[idx[b.parent], idx[b.id]] = -1
    sol = np.linalg.solve(m, currents[nodes])
    out = np.zeros(feeder.n_bus, dtype=complex)
    out[nodes] = sol
    return out


@pytest.mark.parametrize("seed", range(5))
def test_sweep_matches_kcl_linear_system(seed):
    rng = np.random.default_rng(seed)
    buses = [Bus(0, None)] + [Bus(i, int(rng.integers(0, i))) for i in range(1, 5)]
    feeder = validate_feeder(buses)
    currents = rng.normal(size=5) + 1j * rng.normal(size=5)
    currents[0] = 0
    np.testing.assert_allclose(
        sweep_branch_currents(currents, feeder), kcl_oracle(feeder, currents), atol=1e-14
    )


def test_forward_update():
    feeder = chain({"branch_r": 0.01, "branch_x": 0.01})
    assert np.all(forward_voltage_update(np.zeros(2, complex), feeder) == 1.0)
    v = forward_voltage_update(np.array([0, 0.1 - 0.05j]), feeder)
    assert v[1] == pytest.approx(0.99850 - 0.00050j, abs=1e-15)


def test_forward_update_siblings_independent():
    feeder = validate_feeder(
        [Bus(0, None), Bus(1, 0, branch_r=0.02, branch_x=0.01), Bus(2, 0, branch_r=0.01)]
    )
    a = forward_voltage_update(np.array([0, 0.1, 0.2 + 0.1j]), feeder)
    b = forward_voltage_update(np.array([0, 0.1, 0.0]), feeder)
    assert a[1] == b[1]
    assert a[2] != b[2]


def test_total_losses_single_branch():
    feeder = chain({"branch_r": 0.01})
    assert total_losses(np.zeros(2, complex), feeder) == 0
    assert total_losses(np.array([0, 0.1]), feeder) == pytest.approx(1e-4, rel=1e-14)


def test_zero_load_converges_immediately():
    feeder = chain({"branch_r": 0.01, "branch_x": 0.02}, {"branch_r": 0.03})
    state = solve(feeder)
    assert state.iterations == 1
    assert np.all(state.voltages == 1.0)
    assert state.total_loss == 0.0


def test_two_bus_against_analytic_root():
    feeder = chain(dict(branch_r=0.01, branch_x=0.01, p_load=0.1, q_load=0.05))
    state = solve(feeder)
    expected = two_bus_vmag(0.01, 0.01, 0.1, 0.05)
    assert expected == pytest.approx(0.9984976176592139, abs=1e-15)
    assert abs(state.v_mag[1] - expected) <= 1e-9
    # loss: r |S|^2 / |V|^2
    assert state.total_loss == pytest.approx(0.01 * 0.0125 / expected**2, abs=1e-12)


def test_two_bus_overload_diverges():
    assert two_bus_vmag(0.1, 0.0, 100.0, 0.0) is None
    feeder = chain(dict(branch_r=0.1, p_load=100.0))
    with pytest.raises(Diverged):
        solve(feeder)


def test_iteration_limit_diverges():
    feeder = chain(dict(branch_r=0.05, branch_x=0.05, p_load=0.5, q_load=0.3))
    with pytest.raises(Diverged) as err:
        solve(feeder, config=SolverConfig(max_iterations=2))
    assert err.value.iterations == 2


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tolerance=0)
    with pytest.raises(ValueError):
        SolverConfig(max_iterations=0)


@pytest.mark.parametrize("seed", range(20))
def test_loss_matches_power_balance(seed):
    feeder = random_feeder(seed)
    state = solve(feeder, apply_heuristic(feeder))
    assert abs(state.total_loss - balance_loss(state, feeder)) <= 1e-8
    assert state.residual <= 1e-10
    assert state.residuals[-1] <= state.residuals[-2]


def test_solve_is_deterministic():
    feeder = random_feeder(3)
    assert solve(feeder) == solve(feeder)


def test_angle_sign_convention():
    # active load with resistive branch: V lags, so the reported angle is positive
    feeder = chain(dict(branch_r=0.01, branch_x=0.05, p_load=0.2))
    state = solve(feeder)
    assert np.angle(state.voltages[1]) < 0
    assert state.angle[1] == -np.angle(state.voltages[1])


def test_batch_matches_single_solves():
    feeder = random_feeder(11, max_controllable=3)
    ctrl = feeder.controllable
    rng = np.random.default_rng(0)
    rows = rng.uniform(size=(6, len(ctrl))) * [feeder.buses[i].q_max for i in ctrl]
    res = solve_batch(feeder, rows)
    assert res.converged.all()
    for row, loss, its in zip(rows, res.losses, res.iterations):
        st = solve(feeder, SetpointProfile(dict(zip(ctrl, row))))
        assert loss == st.total_loss
        assert its == st.iterations


def test_batch_flags_divergent_rows():
    feeder = chain(dict(branch_r=0.1, p_load=100.0, q_max=0.1))
    res = solve_batch(feeder, [[0.0], [0.1]])
    assert not res.converged.any()
    assert np.isnan(res.losses).all()
