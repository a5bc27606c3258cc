import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kdvfd.banded import assemble, factor
from kdvfd.exact import one_soliton
from kdvfd.grid import GridFunction, l2_norm
from kdvfd.scheme import (
    SAFETY,
    DtRule,
    SchemeConfig,
    SchemeInstability,
    Trajectory,
    burgers_substep,
    cfl_alpha_holds,
    cfl_l2_holds,
    interpolate,
    max_lambda,
    run,
    step,
    time_step,
)
from oracles import dense_matrix, gauss_solve, lf_flux_form, positive_root


def periodic_cfg(n=64, t_end=0.1, **kw):
    return SchemeConfig(window=(-5.0, 5.0), n_cells=n, boundary="periodic", t_end=t_end, **kw)


def bump(cfg, amp=1.0):
    return cfg.sample(lambda x: amp * np.exp(-(x**2)))


class TestConfig:
    @pytest.mark.parametrize(
        "kw, field",
        [
            ({"window": (1.0, 1.0)}, "window"),
            ({"n_cells": 7}, "n_cells"),
            ({"n_cells": 10.5}, "n_cells"),
            ({"t_end": -1.0}, "t_end"),
            ({"t_end": math.inf}, "t_end"),
            ({"cfl_delta": 1.0}, "cfl_delta"),
            ({"cfl_delta_tilde": 0.0}, "cfl_delta_tilde"),
            ({"dt_rule": "k2"}, "k"),
            ({"dt_rule": "courant", "courant": 0.0}, "courant"),
            ({"record_every": 0}, "record_every"),
        ],
    )
    def test_errors_name_field(self, kw, field):
        base = dict(window=(0.0, 1.0), n_cells=16)
        base.update(kw)
        with pytest.raises(ValueError, match=field):
            SchemeConfig(**base)

    def test_unknown_dt_rule(self):
        with pytest.raises(ValueError):
            SchemeConfig(window=(0.0, 1.0), n_cells=16, dt_rule="rk4")

    def test_grid(self):
        cfg = SchemeConfig(window=(-1.0, 1.0), n_cells=8)
        assert cfg.dx == 0.25
        np.testing.assert_allclose(cfg.x, -1.0 + 0.25 * np.arange(8))


class TestMaxLambda:
    def test_unit_norm_against_quadratic_formula(self):
        s1 = positive_root(0.5, 1.0 / 3.0, 0.25)
        s2 = positive_root(6.0, 1.0, 0.25)
        assert max_lambda(1.0, 0.5, 0.5) == pytest.approx(0.99 * min(s1, s2), rel=1e-14)

    @settings(max_examples=100)
    @given(st.floats(1e-3, 1e3), st.floats(0.01, 0.99), st.floats(0.01, 0.99))
    def test_constraints_hold_and_are_nearly_tight(self, q, d, dt_):
        lam = max_lambda(q, d, dt_)
        assert cfl_l2_holds(lam, q, d) and cfl_alpha_holds(lam, q, dt_)
        assert not (cfl_l2_holds(lam / SAFETY * 1.001, q, d) and cfl_alpha_holds(lam / SAFETY * 1.001, q, dt_))

    @given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
    def test_nonincreasing_in_norm(self, a, b):
        lo, hi = sorted((a, b))
        assert max_lambda(hi, 0.5, 0.5) <= max_lambda(lo, 0.5, 0.5)

    def test_zero_norm_unbounded(self):
        assert max_lambda(0.0, 0.5, 0.5) == math.inf

    @pytest.mark.parametrize("d, dt_", [(0.0, 0.5), (0.5, 1.0), (-0.1, 0.5)])
    def test_delta_range(self, d, dt_):
        with pytest.raises(ValueError, match="delta"):
            max_lambda(1.0, d, dt_)


class TestTimeStep:
    def test_cfl_rule(self):
        cfg = periodic_cfg()
        u0 = bump(cfg)
        lam = max_lambda(l2_norm(u0.values, cfg.dx), 0.5, 0.5)
        assert time_step(cfg, u0) == pytest.approx(lam * cfg.dx**1.5, rel=1e-15)

    def test_quadratic_rule(self):
        cfg = periodic_cfg(dt_rule="k2", k=0.5)
        assert time_step(cfg, bump(cfg)) == pytest.approx(0.5 * cfg.dx**2, rel=1e-15)

    def test_courant_rule(self):
        cfg = periodic_cfg(dt_rule=DtRule.COURANT, courant=0.5)
        assert time_step(cfg, bump(cfg, amp=2.0)) == pytest.approx(0.25 * cfg.dx, rel=1e-15)

    @pytest.mark.parametrize("rule", ["cfl", "courant"])
    def test_zero_data_cap(self, rule):
        cfg = periodic_cfg(dt_rule=rule)
        assert time_step(cfg, cfg.sample(np.zeros_like)) == cfg.dx


class TestBurgers:
    def test_hand_example(self):
        u = GridFunction(np.array([0.0, 1.0, 0.0, -1.0]), 1.0, "periodic")
        w = burgers_substep(u, 0.1).values
        # both neighbours of every node cancel, so <u> = 0 and w = 0
        np.testing.assert_array_equal(w, 0.0)
        np.testing.assert_allclose(w, lf_flux_form(u.values, 0.1, 1.0, True), atol=1e-14)

    def test_hand_example_nonzero(self):
        u = GridFunction(np.array([1.0, 2.0, 0.0, -1.0]), 1.0, "periodic")
        w = burgers_substep(u, 0.1).values
        # every <u>_j is 1/2 here; Du = (1.5, -0.5, -1.5, 0.5)
        np.testing.assert_allclose(w, [0.425, 0.525, 0.575, 0.475], rtol=1e-14)
        np.testing.assert_allclose(w, lf_flux_form(u.values, 0.1, 1.0, True), rtol=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(4, 50), st.floats(1e-4, 0.1), st.integers(0, 2**32 - 1), st.booleans())
    def test_matches_flux_form(self, n, dt, seed, periodic):
        u = np.random.default_rng(seed).standard_normal(n)
        g = GridFunction(u, 0.1, "periodic" if periodic else "line")
        np.testing.assert_allclose(burgers_substep(g, dt).values, lf_flux_form(u, dt, 0.1, periodic), rtol=1e-13, atol=1e-14)

    @pytest.mark.parametrize("c", [0.0, 2.5])
    def test_constants_fixed(self, c):
        g = GridFunction(np.full(10, c), 0.1, "periodic")
        np.testing.assert_array_equal(burgers_substep(g, 0.01).values, c)


class TestStep:
    def test_dense_composition_oracle(self):
        rng = np.random.default_rng(2)
        dx, dt = 0.25, 0.01
        u = GridFunction(rng.standard_normal(8), dx, "periodic")
        f = factor(assemble(dx, dt, 8, "periodic"))
        expected = gauss_solve(dense_matrix(8, dt, dx, True), lf_flux_form(u.values, dt, dx, True))
        np.testing.assert_allclose(step(u, dt, f).values, expected, rtol=1e-10, atol=1e-12)

    @pytest.mark.parametrize("c", [0.0, -1.5])
    def test_constants(self, c):
        u = GridFunction(np.full(16, c), 0.1, "periodic")
        out = step(u, 1e-3, factor(assemble(0.1, 1e-3, 16, "periodic")))
        np.testing.assert_allclose(out.values, c, rtol=1e-13, atol=1e-15)

    def test_mismatched_factorization(self):
        u = GridFunction(np.zeros(16), 0.1, "periodic")
        with pytest.raises(ValueError, match="different grid"):
            step(u, 2e-3, factor(assemble(0.1, 1e-3, 16, "periodic")))

    def test_l2_decreases_under_cfl(self):
        cfg = periodic_cfg(n=200)
        u = bump(cfg, amp=3.0)
        dt = time_step(cfg, u)
        f = factor(assemble(cfg.dx, dt, cfg.n_cells, "periodic"))
        for _ in range(50):
            v = step(u, dt, f)
            assert l2_norm(v.values, cfg.dx) <= l2_norm(u.values, cfg.dx) * (1 + 1e-12)
            u = v


class TestRun:
    def test_zero_time(self):
        cfg = periodic_cfg(t_end=0.0)
        traj, diags = run(cfg, bump(cfg))
        assert traj.times == [0.0] and traj.steps_taken == 0 and len(diags) == 1

    def test_zero_data_stays_zero(self):
        cfg = periodic_cfg(t_end=0.05)
        traj, _ = run(cfg, cfg.sample(np.zeros_like))
        assert all(not s.values.any() for s in traj.snapshots)

    @pytest.mark.parametrize("record_every", [1, 7])
    def test_lands_on_t_end(self, record_every):
        cfg = periodic_cfg(t_end=0.0123, record_every=record_every)
        traj, diags = run(cfg, bump(cfg))
        assert traj.times[-1] == 0.0123
        assert np.all(np.diff(traj.times) > 0)
        assert traj.steps_taken == math.ceil(0.0123 / traj.dt_used - 1e-9)
        assert len(traj.times) == len(diags)
        expected = 1 + traj.steps_taken // record_every + (traj.steps_taken % record_every != 0)
        assert len(traj.times) == expected

    def test_short_last_step_matches_manual_stepping(self):
        cfg = periodic_cfg(t_end=0.0123)
        u0 = bump(cfg)
        traj, _ = run(cfg, u0)
        dt = traj.dt_used
        u = u0
        f = factor(assemble(cfg.dx, dt, cfg.n_cells, "periodic"))
        for _ in range(traj.steps_taken - 1):
            u = step(u, dt, f)
        h = 0.0123 - (traj.steps_taken - 1) * dt
        u = step(u, h, factor(assemble(cfg.dx, h, cfg.n_cells, "periodic")))
        np.testing.assert_allclose(traj.final.values, u.values, rtol=1e-13, atol=1e-15)

    def test_mass_conserved_over_many_steps(self):
        cfg = periodic_cfg(n=128, t_end=0.7, dt_rule="k2", k=0.01, check=False, record_every=10**6)
        u0 = bump(cfg, amp=2.0).with_values(bump(cfg, amp=2.0).values + 0.3)
        traj, diags = run(cfg, u0)
        assert traj.steps_taken >= 10_000
        assert abs(diags[-1].mass - diags[0].mass) <= 1e-10 * abs(diags[0].mass)

    def test_soliton_moves_right(self):
        cfg = SchemeConfig(window=(-10.0, 10.0), n_cells=1000, t_end=1.0, dt_rule="courant", check=False)
        traj, _ = run(cfg, cfg.sample(lambda x: one_soliton(x, -1.0)))
        crest = cfg.x[np.argmax(traj.final.values)]
        assert 0.0 < crest + 3.0 < 4.0

    def test_instability_detected(self):
        cfg = SchemeConfig(window=(-10.0, 10.0), n_cells=200, t_end=5.0, dt_rule="courant", courant=50.0, check=False)
        with pytest.raises(SchemeInstability) as info:
            run(cfg, cfg.sample(lambda x: 50.0 * one_soliton(x, 0.0)))
        assert info.value.step >= 1

    def test_initial_data_on_wrong_grid(self):
        cfg = periodic_cfg()
        with pytest.raises(ValueError, match="configured grid"):
            run(cfg, GridFunction(np.zeros(10), cfg.dx, "periodic"))

    def test_observers_see_every_step(self):
        cfg = periodic_cfg(t_end=0.01)
        seen = []
        run(cfg, bump(cfg), observers=[lambda n, t, h, u, v: seen.append((n, t, h))])
        assert [s[0] for s in seen] == list(range(1, len(seen) + 1))
        assert sum(s[2] for s in seen) == pytest.approx(0.01, rel=1e-13)


class TestInterpolate:
    @pytest.fixture
    def traj(self):
        cfg = periodic_cfg(n=32, t_end=0.5)
        t, _ = run(cfg, bump(cfg))
        assert len(t.times) > 4
        return t

    def test_nodes(self, traj):
        for k in (0, 3, len(traj.times) - 1):
            g = traj.snapshots[k]
            np.testing.assert_array_equal(interpolate(traj, g.x, traj.times[k]), g.values)

    def test_bilinear_function_reproduced(self):
        dx, x0 = 0.5, -1.0
        x = x0 + dx * np.arange(6)
        f = lambda xx, tt: 1.0 + 2.0 * xx - 3.0 * tt + 0.5 * xx * tt
        snaps = [GridFunction(f(x, t), dx, "line", x0) for t in (0.0, 0.2)]
        traj = Trajectory(times=[0.0, 0.2], snapshots=snaps)
        xs = x[:-1] + 0.5 * dx
        np.testing.assert_allclose(interpolate(traj, xs, 0.1), f(xs, 0.1), rtol=1e-13)

    def test_continuous_across_edges(self, traj):
        g = traj.snapshots[0]
        edges = g.x[1:]
        t = 0.5 * (traj.times[1] + traj.times[2])
        left = interpolate(traj, edges - 1e-13, t)
        right = interpolate(traj, edges, t)
        np.testing.assert_allclose(left, right, atol=1e-10)

    def test_outside_span(self, traj):
        with pytest.raises(ValueError, match="outside"):
            interpolate(traj, 0.0, 1.0)

    def test_outside_window_on_line(self):
        g = GridFunction(np.ones(4), 1.0, "line")
        traj = Trajectory(times=[0.0], snapshots=[g])
        with pytest.raises(ValueError, match="window"):
            interpolate(traj, 10.0, 0.0)

    def test_sparse_recording_warns(self):
        cfg = periodic_cfg(n=32, t_end=0.01, record_every=3)
        traj, _ = run(cfg, bump(cfg))
        with pytest.warns(UserWarning, match="every 3 steps"):
            interpolate(traj, 0.0, 0.005)

    def test_no_warning_when_dense(self, traj):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            interpolate(traj, 0.0, 0.005)
