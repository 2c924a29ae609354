import dataclasses
import math

import numpy as np
import pytest

from cfsync.dynamics import (
    SimConfig,
    SimulationError,
    initialize_dynamics,
    simulate,
    step,
)
from cfsync.grid_model import (
    BusSpec,
    Event,
    ExciterSpec,
    GeneratorSpec,
    LineSpec,
    NetworkCase,
    solve_power_flow,
)


def smib_case(x_line=0.5, h=3.0, d=0.0, xdp=0.3, p_set=0.0):
    """Single machine against a near-infinite bus (huge-inertia machine)."""
    return NetworkCase(
        s_base=100.0, f_nominal=60.0,
        buses=[
            BusSpec(1, "slack", 230.0, "A", v_set=1.0),
            BusSpec(2, "pv", 230.0, "A", v_set=1.0),
        ],
        lines=[LineSpec(1, 2, 0.0, x_line, 0.0)],
        generators=[
            GeneratorSpec(1, h=1e8, d=0.0, xdp=0.01, s_machine=100.0),
            GeneratorSpec(2, h=h, d=d, xdp=xdp, s_machine=100.0,
                          p_set=p_set),
        ],
        loads=[],
        subnets={"A": [1, 2]},
    )


class TestConfigValidation:
    def test_dt_out_of_range(self, wscc9):
        with pytest.raises(ValueError, match="dt out of range"):
            simulate(wscc9, SimConfig(t_end=1.0, dt=0.05))

    def test_bad_integrator(self):
        with pytest.raises(ValueError, match="integrator"):
            SimConfig(t_end=1.0, integrator="euler").validate()


class TestInitialization:
    def test_no_flow_equilibrium(self):
        case = smib_case(p_set=0.0)
        pf = solve_power_flow(case)
        state, _ = initialize_dynamics(case, pf)
        # zero transfer: internal angle equals the terminal angle, p_m = 0
        np.testing.assert_allclose(state[:, 0], pf.theta, atol=1e-12)
        np.testing.assert_allclose(state[:, 3], 0.0, atol=1e-12)

    def test_wscc_pm_matches_pf_injections(self, wscc9):
        pf = solve_power_flow(wscc9)
        state, net = initialize_dynamics(wscc9, pf)
        idx = wscc9.bus_index()
        gb = [idx[g.bus] for g in wscc9.generators]
        np.testing.assert_allclose(state[:, 3], pf.p_inj[gb], atol=1e-8)

    def test_unconverged_pf_rejected(self, wscc9):
        pf = solve_power_flow(wscc9)
        bad = dataclasses.replace(pf, max_mismatch=0.1)
        with pytest.raises(SimulationError, match="unconverged"):
            initialize_dynamics(wscc9, bad)


class TestStep:
    def test_equilibrium_is_a_fixed_point(self, wscc9):
        pf = solve_power_flow(wscc9)
        state, net = initialize_dynamics(wscc9, pf)
        nxt = step(state, net, 1e-3)
        assert np.max(np.abs(nxt - state)) < 1e-12

    def test_smib_small_signal_frequency(self):
        case = smib_case(x_line=0.5, h=3.0, xdp=0.3)
        pf = solve_power_flow(case)
        state, net = initialize_dynamics(case, pf)
        ws = case.omega_s
        # closed-form linearized swing frequency around delta0 = 0
        x_total = 0.3 + 0.5 + 0.01
        p_max = 1.0 / x_total
        w_th = math.sqrt(ws * p_max / (2.0 * 3.0))

        state[1, 0] += 0.01  # small rotor-angle perturbation
        dt = 1e-3
        n = 5000
        delta = np.empty(n + 1)
        for i in range(n + 1):
            delta[i] = state[1, 0]
            state = step(state, net, dt)
        sig = delta - delta.mean()
        crossings = np.nonzero(np.diff(np.signbit(sig)))[0]
        # refine by linear interpolation, use many periods
        t_cross = [i + sig[i] / (sig[i] - sig[i + 1]) for i in crossings]
        periods = 0.5 * (len(t_cross) - 1)
        w_meas = 2.0 * math.pi * periods / ((t_cross[-1] - t_cross[0]) * dt)
        assert w_meas == pytest.approx(w_th, rel=0.01)

    def test_rk4_vs_trapezoidal(self, wscc9_loadshed):
        case = dataclasses.replace(
            wscc9_loadshed,
            events=[Event(0.2, "load_scale",
                          {"bus": 6, "p_factor": 0.5, "q_factor": 0.5})])
        a = simulate(case, SimConfig(t_end=1.0, dt=1e-3, integrator="rk4"))
        b = simulate(case, SimConfig(t_end=1.0, dt=1e-3,
                                     integrator="trapezoidal"))
        assert np.max(np.abs(a.v - b.v)) < 1e-5


class TestSimulate:
    def test_undisturbed_equilibrium_stays_flat(self, flat_traj):
        assert np.max(np.abs(flat_traj.v - flat_traj.v[0])) < 1e-6
        dtheta = np.abs(np.diff(flat_traj.theta, axis=0)) / 1e-3
        assert dtheta.max() < 1e-6

    def test_determinism(self, wscc9_loadshed):
        cfg = SimConfig(t_end=3.0, dt=1e-3, record_every=10)
        a = simulate(wscc9_loadshed, cfg)
        b = simulate(wscc9_loadshed, cfg)
        assert np.array_equal(a.v, b.v)
        assert np.array_equal(a.theta, b.theta)
        assert np.array_equal(a.omega, b.omega)

    def test_algebraic_residual_small(self, loadshed_traj):
        assert loadshed_traj.max_residual < 1e-10

    def test_loadshed_excursion_and_final_speed(self, loadshed_traj):
        traj = loadshed_traj
        ws = traj.omega_s
        assert traj.event_times == [2.0]
        # pronounced eps excursion right at the event, at every bus
        eps = np.gradient(np.log(traj.v), traj.times, axis=0)
        i_ev = np.searchsorted(traj.times, 2.0)
        pre = np.abs(eps[: i_ev - 2]).max()
        at_event = np.abs(eps[i_ev - 2: i_ev + 2]).max(axis=0)
        assert pre < 1e-6
        assert np.all(at_event > 100 * max(pre, 1e-6))
        # generation excess after the shed: common final speed above nominal
        assert np.all(traj.omega[-1] > ws + 0.1)
        spread = traj.omega[-1001:].max(axis=1) - traj.omega[-1001:].min(axis=1)
        assert spread.max() < 1e-4

    def test_event_beyond_t_end_warns(self, wscc9):
        case = dataclasses.replace(
            wscc9, events=[Event(5.0, "load_scale",
                                 {"bus": 6, "p_factor": 0.5,
                                  "q_factor": 0.5})])
        with pytest.warns(UserWarning, match="beyond t_end"):
            traj = simulate(case, SimConfig(t_end=0.1, dt=1e-3))
        assert traj.event_times == []

    def test_theta_stays_wrapped(self, loadshed_traj):
        assert np.all(loadshed_traj.theta > -math.pi - 1e-12)
        assert np.all(loadshed_traj.theta <= math.pi + 1e-12)

    def test_exciter_holds_terminal_voltage_equilibrium(self, wscc9):
        case = dataclasses.replace(
            wscc9,
            generators=[
                dataclasses.replace(g, exciter=ExciterSpec(k_ex=20.0,
                                                           t_ex=0.2))
                for g in wscc9.generators
            ])
        traj = simulate(case, SimConfig(t_end=1.0, dt=1e-3))
        assert np.max(np.abs(traj.v - traj.v[0])) < 1e-9
        assert np.max(np.abs(traj.e_q - traj.e_q[0])) < 1e-9
