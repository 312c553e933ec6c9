import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate

from westervelt.derham import build_complex
from westervelt.mesh import TensorGrid
from westervelt.model import (
    BranchError,
    DiscriminantNegative,
    SoundSpeedWeights,
    WesterveltParams,
    build_sound_speed_weights,
    dissipation_rate,
    hamiltonian,
    make_state,
    momentum_of_v,
    p_of_rho,
    rho_of_p,
)
from westervelt.scenarios import medium_sound_speed_sq


class TestConstitutive:
    def test_linear_limit(self):
        p = np.array([0.3, -1.2, 4.0])
        np.testing.assert_array_equal(rho_of_p(p, WesterveltParams(0.0), 0.5), 0.5 * p)

    def test_forward_example(self):
        assert rho_of_p(np.array([0.5]), WesterveltParams(0.2), 1.0)[0] == pytest.approx(0.45, rel=1e-15)

    def test_zero(self):
        assert not np.any(rho_of_p(np.zeros(4), WesterveltParams(0.2), 0.1))
        assert not np.any(p_of_rho(np.zeros(4), WesterveltParams(0.2), 0.1))

    def test_inverse_example(self):
        # (1 - sqrt(1 - 4*0.2*0.45)) / 0.4 = (1 - 0.8) / 0.4
        assert p_of_rho(np.array([0.45]), WesterveltParams(0.2), 1.0)[0] == pytest.approx(0.5, rel=1e-14)

    def test_inverse_linear_limit(self):
        rho = np.array([0.3, -1.2, 4.0])
        np.testing.assert_array_equal(p_of_rho(rho, WesterveltParams(0.0), 0.25), rho / 0.25)

    def test_textbook_branch_agrees(self, rng):
        k, hd = 0.2, 0.01
        rho = rng.uniform(-5, 1.2, 200) * hd
        q = rho / hd
        textbook = (1 - np.sqrt(1 - 4 * k * q)) / (2 * k)
        np.testing.assert_allclose(p_of_rho(rho, WesterveltParams(k), hd), textbook, rtol=1e-11, atol=1e-14)

    def test_small_k_no_cancellation(self):
        # the textbook form loses all digits here; the series gives q + k q^2
        k, q = 1e-12, 0.7
        p = p_of_rho(np.array([q]), WesterveltParams(k), 1.0)[0]
        assert p == pytest.approx(q + k * q * q, rel=1e-15)

    def test_discriminant_negative(self):
        k, hd = 0.2, 0.5
        rho = np.array([0.0, 0.1, 2.0 * hd, 0.0])
        with pytest.raises(DiscriminantNegative) as info:
            p_of_rho(rho, WesterveltParams(k), hd)
        assert info.value.index == 2
        assert info.value.value == pytest.approx(1 - 4 * k * 2.0)
        assert isinstance(info.value, ArithmeticError)

    def test_discriminant_zero_allowed(self):
        k = 0.25
        p = p_of_rho(np.array([1.0]), WesterveltParams(k), 1.0)
        assert p[0] == pytest.approx(1 / (2 * k))

    @given(
        arrays(np.float64, st.integers(1, 64), elements=st.floats(-1.0, 1.0)),
        st.floats(0.0, 2.0),
        st.floats(1e-6, 1.0),
    )
    def test_roundtrip_from_p(self, u, k, hd):
        # scale so that |k p| <= 0.4, capped so subnormal k keeps p finite
        p = u * (min(0.4 / k, 1e6) if k > 0 else 1.0)
        params = WesterveltParams(k)
        back = p_of_rho(rho_of_p(p, params, hd), params, hd)
        scale = max(np.max(np.abs(p)), 1e-300)
        assert np.max(np.abs(back - p)) <= 1e-13 * scale

    @given(arrays(np.float64, st.integers(1, 64), elements=st.floats(-3.0, 0.24)), st.floats(1e-3, 1.0))
    def test_roundtrip_from_rho(self, q, hd):
        params = WesterveltParams(1.0)
        rho = q * hd
        back = rho_of_p(p_of_rho(rho, params, hd), params, hd)
        np.testing.assert_allclose(back, rho, rtol=1e-13, atol=1e-13 * np.max(np.abs(rho)))

    def test_negative_params_rejected(self):
        with pytest.raises(ValueError):
            WesterveltParams(k=-0.1)
        with pytest.raises(ValueError):
            WesterveltParams(b=-1.0)


class TestState:
    def test_make_state_consistent(self, rng):
        params = WesterveltParams(0.2)
        p = rng.uniform(-1, 1, 10)
        s = make_state(0.0, p, np.zeros(10), params, 0.1)
        np.testing.assert_allclose(s.rho, 0.1 * (p - 0.2 * p * p), rtol=1e-12)

    def test_branch_enforced(self):
        with pytest.raises(BranchError):
            make_state(0.0, [0.0, 2.5], [0.0, 0.0], WesterveltParams(0.2), 1.0)
        with pytest.raises(BranchError):
            make_state(0.0, [0.0, 2.501], [0.0, 0.0], WesterveltParams(0.2), 1.0)

    def test_copy_independent(self):
        s = make_state(0.0, [1.0, 2.0], [0.0, 0.0], WesterveltParams(0.0), 1.0)
        c = s.copy()
        c.p[0] = 9.0
        assert s.p[0] == 1.0


class TestSoundSpeed:
    def test_unit(self):
        g = TensorGrid.uniform([4, 5])
        w = build_sound_speed_weights(g, WesterveltParams())
        assert w.values.shape == (40,) and np.all(w.values == 1.0) and w.is_uniform

    def test_staggered_sample_points(self):
        g = TensorGrid.uniform([8, 8])
        w = build_sound_speed_weights(g, WesterveltParams(sound_speed_sq=medium_sound_speed_sq))
        wx, wy = w.values[:64], w.values[64:]
        i = g.flat_index((4, 3))
        # x-block at (x_4, y_{3+1/2}) = (0.5, 0.4375); y-block at (x_{4+1/2}, y_3)
        assert wx[i] == medium_sound_speed_sq(0.5, 3.5 / 8)
        assert wy[i] == medium_sound_speed_sq(4.5 / 8, 3 / 8)

    def test_pointwise_value_at_half(self):
        # sin^2(pi/2)=1 kills nothing else: only the first term varies in y here
        y = 3.5 / 8
        expect = 1 - 0.75 * math.sin(math.pi * y) ** 2 - 0 - 0
        assert medium_sound_speed_sq(0.5, y) == pytest.approx(expect, abs=1e-15)

    def test_medium_range_320(self):
        g = TensorGrid.uniform([320, 320])
        w = build_sound_speed_weights(g, WesterveltParams(sound_speed_sq=medium_sound_speed_sq))
        assert w.values.min() >= 0.0782421 - 1e-7
        assert w.values.max() <= 1.0

    def test_nonpositive_rejected(self):
        g = TensorGrid.uniform([4])
        with pytest.raises(ValueError):
            build_sound_speed_weights(g, WesterveltParams(sound_speed_sq=lambda x: np.cos(2 * np.pi * x)))

    def test_integrated_against_quad(self):
        g = TensorGrid.uniform([6, 5])
        c2 = medium_sound_speed_sq
        w = build_sound_speed_weights(g, WesterveltParams(sound_speed_sq=c2), integrated=True).values
        dx, dy = g.spacings
        i, j = 2, 3
        y = (j + 0.5) * dy
        x0 = i * dx
        ref, _ = integrate.quad(lambda x: c2(x, y), x0 - dx / 2, x0 + dx / 2, epsabs=1e-14)
        assert w[g.flat_index((i, j))] == pytest.approx(ref / dx, rel=1e-12)


class TestMomentumAndEnergy:
    def test_zero_momentum(self):
        cx = build_complex(TensorGrid.uniform([5]))
        assert not np.any(momentum_of_v(np.zeros(5), cx.H1))

    def test_unit_momentum(self):
        cx = build_complex(TensorGrid.uniform([10]))
        np.testing.assert_allclose(momentum_of_v(np.ones(10), cx.H1), 10.0, rtol=1e-14)

    def test_scaled_momentum(self, rng):
        cx = build_complex(TensorGrid.uniform([6]))
        v = rng.standard_normal(6)
        w = SoundSpeedWeights(np.full(6, 0.3))
        np.testing.assert_allclose(momentum_of_v(v, cx.H1, w), 0.3 * cx.H1.apply(v))

    def test_hamiltonian_zero(self):
        cx = build_complex(TensorGrid.uniform([4]))
        s = make_state(0, np.zeros(4), np.zeros(4), WesterveltParams(0.2), 0.25)
        assert hamiltonian(s, WesterveltParams(0.2), cx) == 0.0

    def test_hamiltonian_quadratic(self):
        g = TensorGrid.uniform([3])
        cx = build_complex(g)
        params = WesterveltParams(0.0)
        s = make_state(0, np.ones(3), np.zeros(3), params, g.cell_volume)
        assert hamiltonian(s, params, cx) == pytest.approx(0.5, rel=1e-15)

    def test_hamiltonian_cubic_term(self):
        g = TensorGrid.uniform([4])
        cx = build_complex(g)
        params = WesterveltParams(0.3)
        p = np.array([1.0, -1.0, 0.5, 0.0])
        s = make_state(0, p, np.zeros(4), params, g.cell_volume)
        expect = 0.5 * np.sum(p ** 2) * 0.25 - (2 * 0.3 / 3) * np.sum(p ** 3) * 0.25
        assert hamiltonian(s, params, cx) == pytest.approx(expect, rel=1e-15)

    @pytest.mark.parametrize("shape", [(12,), (6, 5)])
    def test_rotation_invariant(self, shape, rng):
        g = TensorGrid.uniform(list(shape))
        cx = build_complex(g)
        params = WesterveltParams(0.2)
        p = rng.uniform(-1, 1, g.n_nodes)
        v = rng.standard_normal(g.n_dofs(1))
        H = hamiltonian(make_state(0, p, v, params, g.cell_volume), params, cx)
        rp = np.roll(p.reshape(shape), (2,) * g.dim, axis=tuple(range(g.dim))).reshape(-1)
        rv = np.concatenate([np.roll(c.reshape(shape), (2,) * g.dim, axis=tuple(range(g.dim))).reshape(-1)
                             for c in np.split(v, g.dim)])
        Hr = hamiltonian(make_state(0, rp, rv, params, g.cell_volume), params, cx)
        assert Hr == pytest.approx(H, rel=1e-13)

    @given(st.integers(0, 2**31), st.floats(0.0, 0.5))
    def test_gradient_wrt_rho_is_p(self, seed, k):
        rng = np.random.default_rng(seed)
        g = TensorGrid.uniform([8])
        cx = build_complex(g)
        params = WesterveltParams(k)
        hd = g.cell_volume
        # stay inside |k p| <= 0.4, away from the fold of the constitutive map
        p = rng.uniform(-1, 1, 8) * (min(1.0, 0.4 / k) if k > 0 else 1.0)
        v = rng.standard_normal(8)
        s = make_state(0, p, v, params, hd)
        d = rng.standard_normal(8)
        # rho is a density (h^d p), so the step is eps in pressure units
        eps = 1e-5 * hd

        def H_of_rho(rho):
            pp = p_of_rho(rho, params, hd)
            return hamiltonian(s.replace(rho=rho, p=pp), params, cx)

        fd = (H_of_rho(s.rho + eps * d) - H_of_rho(s.rho - eps * d)) / (2 * eps)
        exact = p @ d
        assert abs(fd - exact) <= 1e-8 * max(abs(exact), np.linalg.norm(p) * np.linalg.norm(d))

    @pytest.mark.parametrize("medium", [False, True])
    def test_gradient_wrt_v_is_momentum(self, medium, rng):
        g = TensorGrid.uniform([6, 7])
        cx = build_complex(g)
        params = WesterveltParams(0.2, sound_speed_sq=medium_sound_speed_sq if medium else None)
        w = build_sound_speed_weights(g, params)
        s = make_state(0, rng.uniform(-1, 1, g.n_nodes), rng.standard_normal(g.n_dofs(1)), params, g.cell_volume)
        d = rng.standard_normal(g.n_dofs(1))
        eps = 1e-5
        fd = (hamiltonian(s.replace(v=s.v + eps * d), params, cx, w)
              - hamiltonian(s.replace(v=s.v - eps * d), params, cx, w)) / (2 * eps)
        exact = momentum_of_v(s.v, cx.H1, w) @ d
        assert fd == pytest.approx(exact, rel=1e-8)


class TestDissipationRate:
    def test_constant_pressure(self):
        cx = build_complex(TensorGrid.uniform([5]))
        assert dissipation_rate(np.full(5, 2.0), WesterveltParams(b=1.0), cx) == 0.0

    def test_no_diffusivity(self, rng):
        cx = build_complex(TensorGrid.uniform([5]))
        assert dissipation_rate(rng.standard_normal(5), WesterveltParams(b=0.0), cx) == 0.0

    def test_stencil_example(self):
        cx = build_complex(TensorGrid.uniform([4]))
        assert dissipation_rate(np.array([1.0, 0, 0, 0]), WesterveltParams(b=1.0), cx) == pytest.approx(-8.0)

    @given(st.integers(0, 2**31))
    def test_nonpositive(self, seed):
        rng = np.random.default_rng(seed)
        cx = build_complex(TensorGrid.uniform([5, 6]))
        assert dissipation_rate(rng.standard_normal(30), WesterveltParams(b=0.3), cx) <= 0.0

    def test_ignores_sound_speed(self, rng):
        cx = build_complex(TensorGrid.uniform([6, 6]))
        p = rng.standard_normal(36)
        a = dissipation_rate(p, WesterveltParams(b=0.1), cx)
        b = dissipation_rate(p, WesterveltParams(b=0.1, sound_speed_sq=medium_sound_speed_sq), cx)
        assert a == b
