import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate

from westervelt import scenarios
from westervelt.derham import build_complex, interpolate_0form, reduce_1form
from westervelt.mesh import TensorGrid
from westervelt.model import WesterveltParams, hamiltonian, make_state
from westervelt.scenarios import (
    ConfigError,
    NumericalFailure,
    OutputError,
    ScenarioConfig,
    build_problem,
    default_config,
    gaussian_1d_initial,
    manufactured_1d,
    manufactured_2d,
    medium_2d_scenario,
    medium_initial,
    medium_sound_speed_sq,
    read_snapshot,
    read_timeseries,
    run_convergence_study,
    run_scenario,
)

TWO_PI = 2 * math.pi


def central(f, x, h=1e-5):
    return (f(x + h) - f(x - h)) / (2 * h)


class TestManufactured1D:
    def test_source_at_origin(self):
        assert manufactured_1d(0.2, 0.01).source_p(np.array(0.0), 0.0) == pytest.approx(0.04 * math.pi ** 2, rel=1e-14)
        assert 0.04 * math.pi ** 2 == pytest.approx(0.39478, abs=1e-5)

    def test_initial_data(self):
        sol = manufactured_1d()
        x = np.linspace(0, 1, 17)
        np.testing.assert_array_equal(sol.initial_pressure(x), np.cos(TWO_PI * x))
        np.testing.assert_array_equal(sol.initial_velocity(x)[0], 0.0)

    @pytest.mark.parametrize("x", [0.0, 0.13, 0.5, 0.77])
    def test_step_integral_matches_quadrature(self, x):
        sol = manufactured_1d(0.2, 0.01)
        ref, _ = integrate.quad(lambda t: float(sol.source_p(np.array(x), t)), 0.1, 0.1125, epsabs=1e-14, epsrel=1e-13)
        assert float(sol.source_p_integral(np.array(x), 0.1, 0.1125)) == pytest.approx(ref, abs=1e-10)

    @pytest.mark.parametrize("x, t", [(0.1, 0.2), (0.37, 0.61), (0.9, 0.05)])
    def test_source_closes_the_balance(self, x, t):
        # d/dt[(1 - k p) p] + dv/dx - b d2p/dx2 = S_p and dv/dt + dp/dx = 0
        k, b = 0.2, 0.01
        sol = manufactured_1d(k, b)
        p = lambda x_, t_: float(sol.pressure(np.array(x_), t_))
        v = lambda x_, t_: float(sol.velocity(np.array(x_), t_)[0])
        rho_t = central(lambda s: (1 - k * p(x, s)) * p(x, s), t)
        v_x = central(lambda s: v(s, t), x)
        p_xx = (p(x + 1e-4, t) - 2 * p(x, t) + p(x - 1e-4, t)) / 1e-8
        assert rho_t + v_x - b * p_xx == pytest.approx(float(sol.source_p(np.array(x), t)), abs=1e-6)
        assert central(lambda s: v(x, s), t) + central(lambda s: p(s, t), x) == pytest.approx(0.0, abs=1e-8)

    def test_velocity_primitive(self):
        sol = manufactured_1d()
        g = TensorGrid.uniform([9])
        _, v = sol.coefficients(g, t=0.3)
        np.testing.assert_allclose(v, reduce_1form(g, lambda x: sol.velocity(x, 0.3)), rtol=0, atol=1e-14)


class TestManufactured2D:
    def test_source_at_origin(self):
        b = 0.01
        assert manufactured_2d(0.2, b).source_p(np.array(0.0), np.array(0.0), 0.0) == pytest.approx(8 * b * math.pi ** 2)

    def test_initial_data(self):
        sol = manufactured_2d()
        x, y = np.meshgrid(np.linspace(0, 1, 5), np.linspace(0, 1, 7))
        np.testing.assert_allclose(sol.initial_pressure(x, y), np.cos(TWO_PI * x) * np.cos(TWO_PI * y))
        vx, vy = sol.initial_velocity(x, y)
        assert not np.any(vx) and not np.any(vy)

    def test_step_integral_matches_quadrature(self):
        sol = manufactured_2d(0.2, 0.01)
        x, y = np.array(0.21), np.array(0.64)
        ref, _ = integrate.quad(lambda t: float(sol.source_p(x, y, t)), 0.1, 0.1125, epsabs=1e-14, epsrel=1e-13)
        assert float(sol.source_p_integral(x, y, 0.1, 0.1125)) == pytest.approx(ref, abs=1e-10)

    def test_source_closes_the_balance(self):
        k, b = 0.2, 0.01
        sol = manufactured_2d(k, b)
        x, y, t = 0.31, 0.72, 0.43
        p = lambda x_, y_, t_: float(sol.pressure(np.array(x_), np.array(y_), t_))
        vel = lambda x_, y_, t_: [float(c) for c in sol.velocity(np.array(x_), np.array(y_), t_)]
        rho_t = central(lambda s: (1 - k * p(x, y, s)) * p(x, y, s), t)
        div = central(lambda s: vel(s, y, t)[0], x) + central(lambda s: vel(x, s, t)[1], y)
        h = 1e-4
        lap = (p(x + h, y, t) + p(x - h, y, t) + p(x, y + h, t) + p(x, y - h, t) - 4 * p(x, y, t)) / h ** 2
        assert rho_t + div - b * lap == pytest.approx(float(sol.source_p(np.array(x), np.array(y), t)), abs=1e-6)

    def test_velocity_primitive(self):
        sol = manufactured_2d()
        g = TensorGrid.uniform([6, 5])
        _, v = sol.coefficients(g, t=0.2)
        np.testing.assert_allclose(v, reduce_1form(g, lambda x, y: sol.velocity(x, y, 0.2)), rtol=0, atol=1e-14)

    def test_collocation(self):
        # reduced then interpolated initial data reproduce the nodal values exactly
        sol = manufactured_2d()
        g = TensorGrid.uniform([8, 6])
        p, _ = sol.coefficients(g)
        x, y = g.node_coords()
        assert np.array_equal(interpolate_0form(g, p)(x, y), sol.initial_pressure(x, y))


class TestGaussian:
    def test_peak(self):
        assert gaussian_1d_initial().pressure(np.array(2.0)) == 1.0

    def test_one_sigma(self):
        assert gaussian_1d_initial().pressure(np.array((0.2 + 0.05) * 10)) == pytest.approx(math.exp(-0.5), rel=1e-14)

    def test_defaults(self):
        c = default_config("gaussian-1d")
        assert (c.mu, c.length_scale, c.sigma) == (0.2, 10.0, 0.05)
        assert c.domain == (10.0,) and c.t_end == 6.0 and c.resolutions == (320,)
        assert (c.k, c.b) == (0.2, 0.01)

    def test_bad_sigma(self):
        with pytest.raises(ConfigError):
            gaussian_1d_initial(sigma=0.0)

    def test_coefficients(self):
        g = TensorGrid.uniform([320], 10.0)
        p, v = gaussian_1d_initial().coefficients(g)
        assert p[64] == 1.0 and not np.any(v)


class TestMedium:
    def test_sound_speed_values(self):
        assert medium_sound_speed_sq(0.0, 0.0) == 1.0
        assert medium_sound_speed_sq(0.5, 0.5) == pytest.approx(0.25, abs=1e-15)

    def test_config(self):
        config, params, init = medium_2d_scenario()
        assert (config.k, config.b) == (0.2, 1e-3)
        assert config.resolutions == (320,)
        assert params.sound_speed_sq is medium_sound_speed_sq

    def test_default_policy_dt(self):
        config, _, _ = medium_2d_scenario(resolutions=(64,))
        prob = build_problem(config, 64)
        assert prob.dt == pytest.approx(1 / (4 * 1e-3 * (64 ** 2 + 64 ** 2)), rel=1e-14)

    def test_initial_fields(self):
        g = TensorGrid.uniform([8, 8])
        p, v = medium_initial().coefficients(g)
        assert not np.any(p)
        field = lambda x, y: (np.cos(TWO_PI * x) * np.cos(TWO_PI * y), np.sin(TWO_PI * x) * np.sin(TWO_PI * y))
        np.testing.assert_allclose(v, reduce_1form(g, field), rtol=0, atol=1e-14)
        assert np.max(np.abs(build_complex(g).C.apply(v))) > 0.1


class TestConfig:
    @pytest.mark.parametrize("changes", [
        dict(scenario="nope"),
        dict(k=-1.0),
        dict(resolutions=(20, 30)),
        dict(resolutions=(2,)),
        dict(resolutions=()),
        dict(t_end=0.0),
        dict(dt_policy="fast"),
        dict(scheme="rk4"),
        dict(domain=(1.0, 1.0)),
        dict(b=0.0),
        dict(snapshot_stride=-1),
        dict(cfl_safety=0.0),
    ])
    def test_rejected(self, changes):
        with pytest.raises(ConfigError):
            replace(default_config("converge-1d"), **changes).validate()

    def test_auto_policy(self):
        c = default_config("converge-1d", dt_policy="auto", cfl_safety=0.5, resolutions=(40,))
        prob = build_problem(c, 40)
        norm = 4 * 40 ** 2
        assert prob.dt == pytest.approx(0.5 * min(1 / math.sqrt(norm), 1 / (0.01 * norm)), rel=1e-14)

    def test_explicit_dt_wins(self):
        c = default_config("converge-1d", dt=1e-3, resolutions=(40,))
        assert build_problem(c, 40).dt == 1e-3


class TestRuns:
    def test_gaussian_step_count(self, tmp_path):
        c = default_config("gaussian-1d", output_dir=str(tmp_path))
        res = run_scenario(c)
        assert res.n_steps == 246
        ts = read_timeseries(tmp_path / "timeseries.csv")
        assert len(ts["t"]) == 247
        assert ts["t"][-1] == 6.0

    def test_converge_small_is_fast(self):
        c = default_config("converge-1d", resolutions=(20,))
        start = time.perf_counter()
        res = run_scenario(c)
        assert time.perf_counter() - start < 1.0
        assert res.error.rel_l2 > 0

    def test_artifacts(self, tmp_path):
        c = default_config("converge-2d", resolutions=(12,), output_dir=str(tmp_path), snapshot_stride=3)
        res = run_scenario(c)
        with open(tmp_path / "timeseries.csv") as fh:
            assert fh.readline().strip() == "t,H,diss_rate,diss_integral,vorticity_drift,nonlinear_solves"
        man = json.loads((tmp_path / "run_manifest.json").read_text())
        assert man["config"]["scenario"] == "converge-2d"
        assert man["resolved"]["dt"] == res.dt
        assert man["version"].startswith("0.1.0")
        errs = json.loads((tmp_path / "errors.json").read_text())
        assert errs["rel_l2"] == res.error.rel_l2
        snaps = sorted(p.name for p in (tmp_path / "snapshots").iterdir())
        last = f"{res.n_steps:06d}"
        assert f"state_{last}.csv" in snaps and f"vorticity_{last}.csv" in snaps
        assert "state_000003.csv" in snaps and "state_000001.csv" not in snaps
        vort = read_snapshot(tmp_path / "snapshots" / "vorticity_000000.csv")
        assert set(vort) == {"i_x", "i_y", "x", "y", "value"}

    def test_snapshot_roundtrip_energy(self, tmp_path):
        c = default_config("medium-2d", resolutions=(16,), t_end=0.05, output_dir=str(tmp_path))
        res = run_scenario(c)
        snap = read_snapshot(tmp_path / "snapshots" / f"state_{res.n_steps:06d}.csv")
        g = TensorGrid.uniform([16, 16])
        params = WesterveltParams(c.k, c.b, medium_sound_speed_sq)
        from westervelt.model import build_sound_speed_weights

        w = build_sound_speed_weights(g, params)
        v = np.concatenate([snap["v_x"], snap["v_y"]])
        state = make_state(snap["t"], snap["p"], v, params, g.cell_volume)
        np.testing.assert_array_equal(snap["rho"], res.state.rho)
        ts = read_timeseries(tmp_path / "timeseries.csv")
        H = hamiltonian(state, params, build_complex(g), w)
        assert H == pytest.approx(ts["H"][-1], rel=1e-12)

    def test_deterministic(self, tmp_path):
        bodies = []
        for sub in ("a", "b"):
            c = default_config("gaussian-1d", resolutions=(64,), t_end=1.0, output_dir=str(tmp_path / sub))
            run_scenario(c)
            bodies.append(((tmp_path / sub / "timeseries.csv").read_bytes(),
                           (tmp_path / sub / "snapshots" / "state_000000.csv").read_bytes()))
        assert bodies[0] == bodies[1]

    def test_numerical_failure_has_step(self):
        c = ScenarioConfig("custom", k=0.4, b=0.5, resolutions=(32,), domain=(1.0,), t_end=50.0,
                           dt=0.05, profile="gaussian", mu=0.5, sigma=0.1)
        with pytest.raises(NumericalFailure) as info:
            with np.errstate(all="ignore"):
                run_scenario(c)
        assert info.value.step >= 1

    def test_output_error_has_path(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        c = default_config("converge-1d", resolutions=(20,), output_dir=str(blocker / "out"))
        with pytest.raises(OutputError, match="file"):
            run_scenario(c)


class TestConvergenceStudy:
    def test_table_and_files(self, tmp_path):
        c = default_config("converge-1d", resolutions=(20, 40, 80), output_dir=str(tmp_path))
        table = run_convergence_study(c)
        assert table.complete and len(table.orders_l2) == 2
        rows = (tmp_path / "convergence.csv").read_text().splitlines()
        assert rows[0] == "n,dt,rel_l2,order_l2,rel_linf,order_linf" and len(rows) == 4
        assert "order" in (tmp_path / "convergence.txt").read_text()
        assert (tmp_path / "n0040" / "timeseries.csv").exists()

    def test_parallel_matches_serial(self):
        c = default_config("converge-1d", resolutions=(20, 40, 80))
        serial = run_convergence_study(c)
        parallel = run_convergence_study(replace(c, jobs=3))
        assert [e.rel_l2 for e in serial.errors] == [e.rel_l2 for e in parallel.errors]

    def test_partial_results_kept(self, tmp_path, monkeypatch):
        real = scenarios._run_one

        def flaky(config, n):
            if n == 80:
                raise NumericalFailure(7, FloatingPointError("boom"))
            return real(config, n)

        monkeypatch.setattr(scenarios, "_run_one", flaky)
        c = default_config("converge-1d", resolutions=(20, 40, 80, 160), output_dir=str(tmp_path))
        with pytest.raises(NumericalFailure):
            run_convergence_study(c)
        rows = (tmp_path / "convergence.csv").read_text().splitlines()
        assert len(rows) == 3
        assert "incomplete" in (tmp_path / "convergence.txt").read_text()

    def test_needs_exact_solution(self):
        with pytest.raises(ConfigError):
            run_convergence_study(default_config("gaussian-1d"))
