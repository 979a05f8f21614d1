import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from nemscat.coherent import InitialAmplitudes, evolve_amplitudes, p_minus
from nemscat.dissipative import (
    DampingParams,
    DegenerateGeneratorWarning,
    damped_amplitudes_closed,
    damped_ode_rhs,
    decoherence_f,
    decoherence_G,
    energy_decay_check,
    g_from_amplitudes,
    g_minus_only,
    integrate_amplitudes,
    log_f_closed,
    mode_coefficients,
    p_minus_dissipative,
    short_time_f,
    short_time_visibility,
    sigma_x_expectation,
    symmetric_damped_amplitudes,
    symmetric_log_f,
)
from nemscat.errors import DomainError
from nemscat.params import effective_model

FIG6 = effective_model(chi=1.0, Omega=0.25, kappa=0.5)
FIG6_DAMP = DampingParams(0.001, 0.01)
FIG6_INIT = InitialAmplitudes(2.0, 2.0)
SYM = effective_model(chi=1.0, Omega=1.0, kappa=1.0)

coupling = st.floats(-2.0, 2.0, allow_nan=False)
rate = st.floats(0.0, 0.2, allow_nan=False)
amp = st.floats(-3.0, 3.0, allow_nan=False)


def expm_oracle(init, model, damping, t, branch):
    sign = 1.0 if branch == "plus" else -1.0
    A = -1j * sign * np.array(model.generator, dtype=float) - 0.5 * np.diag([damping.gamma_a, damping.gamma_b])
    x0 = np.array([init.alpha0, init.beta0])
    out = np.array([expm(A * ti) @ x0 for ti in np.atleast_1d(t)])
    return out[:, 0], out[:, 1]


def test_damping_params():
    d = DampingParams(0.3, 0.1)
    assert d.gamma_plus == 0.1
    with pytest.raises(DomainError):
        DampingParams(-0.1, 0.0)


@settings(max_examples=100, deadline=None)
@given(coupling, coupling, coupling, rate, rate)
def test_w_identity(chi, om, k, ga, gb):
    model = effective_model(chi=chi, Omega=om, kappa=k)
    w = DampingParams(ga, gb).w(model)
    s = ga - gb + 2j * model.Delta
    assert abs(w * w + s * s / 4 - 4 * k * k) < 1e-12 * (1 + abs(s) ** 2 + 4 * k * k)


@settings(max_examples=100, deadline=None)
@given(coupling, coupling, coupling, rate, rate, amp, amp, amp, amp)
def test_mode_coefficients_initial_condition(chi, om, k, ga, gb, ar, ai, br, bi):
    model = effective_model(chi=chi, Omega=om, kappa=k)
    damping = DampingParams(ga, gb)
    if abs(damping.w(model)) < 1e-6:
        return
    init = InitialAmplitudes(complex(ar, ai), complex(br, bi))
    c = mode_coefficients(init, model, damping)
    scale = 1 + math.sqrt(init.energy)
    assert abs(c.U + c.V - init.alpha0) < 1e-12 * scale / min(1.0, abs(c.w))
    assert abs(c.X + c.Y - init.beta0) < 1e-12 * scale / min(1.0, abs(c.w))


def test_ode_rhs_examples():
    assert damped_ode_rhs(0j, 0j, "plus", FIG6, FIG6_DAMP) == (0j, 0j)
    da, db = damped_ode_rhs(1 + 0j, 1 + 0j, "plus", FIG6, FIG6_DAMP)
    assert da == pytest.approx(-0.0005 - 1.5j, abs=1e-15)
    assert db == pytest.approx(-0.005 - 0.75j, abs=1e-15)
    a, b = 0.3 - 0.2j, 1.1j
    da, db = damped_ode_rhs(a, b, "plus", FIG6, DampingParams())
    ref = -1j * np.array(FIG6.generator) @ np.array([a, b])
    assert np.allclose([da, db], ref, atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(coupling, coupling, coupling, rate, rate, amp, amp, amp, amp)
def test_closed_form_matches_matrix_exponential(chi, om, k, ga, gb, ar, ai, br, bi):
    model = effective_model(chi=chi, Omega=om, kappa=k)
    damping = DampingParams(ga, gb)
    if abs(damping.w(model)) < 1e-3:
        return  # near-defective generator: covered by the fallback test
    init = InitialAmplitudes(complex(ar, ai), complex(br, bi))
    t = np.linspace(0, 8, 9)
    for branch in ("plus", "minus"):
        a, b = damped_amplitudes_closed(init, model, damping, t, branch)
        ra, rb = expm_oracle(init, model, damping, t, branch)
        tol = 1e-10 * (1 + math.sqrt(init.energy)) / min(1.0, abs(damping.w(model)))
        assert np.max(np.abs(a - ra)) < tol
        assert np.max(np.abs(b - rb)) < tol


def test_closed_form_matches_adaptive_ode_fig6():
    t = np.linspace(0, 10, 1001)
    for branch in ("plus", "minus"):
        a, b = damped_amplitudes_closed(FIG6_INIT, FIG6, FIG6_DAMP, t, branch)
        ra, rb = integrate_amplitudes(FIG6_INIT, FIG6, FIG6_DAMP, t, branch)
        assert max(np.max(np.abs(a - ra)), np.max(np.abs(b - rb))) < 1e-8


def test_zero_damping_reduces_to_coherent():
    init = InitialAmplitudes(0.5 - 1j, 1.5)
    t = np.linspace(0, 20, 401)
    for branch in ("plus", "minus"):
        a, b = damped_amplitudes_closed(init, FIG6, DampingParams(), t, branch)
        ca, cb = evolve_amplitudes(init, FIG6, t, branch)
        assert np.max(np.abs(a - ca)) < 1e-10
        assert np.max(np.abs(b - cb)) < 1e-10


def test_symmetric_damped_amplitudes():
    t = np.linspace(0, 10, 201)
    a, b = damped_amplitudes_closed(InitialAmplitudes(0, 2.0), SYM, DampingParams(0.1, 0.1), t)
    sa, sb = symmetric_damped_amplitudes(2.0, 1.0, 0.1, t)
    assert np.max(np.abs(a - sa)) < 1e-12
    assert np.max(np.abs(b - sb)) < 1e-12
    # amplitudes decay at gamma/2, so the total occupation decays at gamma
    assert np.allclose(np.abs(a) ** 2 + np.abs(b) ** 2, 4.0 * np.exp(-0.1 * t), rtol=1e-12)


def test_plus_branch_is_conjugate_for_real_initial_amplitudes():
    t = np.linspace(0, 15, 151)
    ap, bp = damped_amplitudes_closed(FIG6_INIT, FIG6, FIG6_DAMP, t, "plus")
    am, bm = damped_amplitudes_closed(FIG6_INIT, FIG6, FIG6_DAMP, t, "minus")
    assert np.max(np.abs(am - np.conj(ap))) < 1e-10
    assert np.max(np.abs(bm - np.conj(bp))) < 1e-10


def test_energy_decay_check():
    t = np.linspace(0, 5, 50001)  # dt = 1e-4
    a, b = symmetric_damped_amplitudes(2.0, 1.0, 0.1, t)
    assert energy_decay_check(t, a, b, DampingParams(0.1, 0.1)) < 1e-6
    a, b = damped_amplitudes_closed(FIG6_INIT, FIG6, FIG6_DAMP, t)
    assert energy_decay_check(t, a, b, FIG6_DAMP) < 1e-5
    a, b = evolve_amplitudes(FIG6_INIT, FIG6, t)
    assert energy_decay_check(t, a, b, DampingParams()) < 1e-6
    with pytest.raises(DomainError):
        energy_decay_check(t[:2], a[:2], b[:2], FIG6_DAMP)
    with pytest.raises(DomainError):
        energy_decay_check(np.array([0, 1, 3.0]), a[:3], b[:3], FIG6_DAMP)


def test_G_examples():
    t = np.linspace(0, 5, 11)
    assert np.all(decoherence_G(t, FIG6_INIT, FIG6, DampingParams()) == 0)
    assert decoherence_G(0.0, FIG6_INIT, FIG6, FIG6_DAMP) == pytest.approx(0, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(coupling, coupling, coupling, rate, rate, amp, amp, st.floats(0, 10))
def test_G_two_forms_agree_for_real_amplitudes(chi, om, k, ga, gb, a0, b0, t):
    model = effective_model(chi=chi, Omega=om, kappa=k)
    damping = DampingParams(ga, gb)
    init = InitialAmplitudes(a0, b0)
    # both branches from the matrix-exponential oracle
    ap, bp = (v[0] for v in expm_oracle(init, model, damping, t, "plus"))
    am, bm = (v[0] for v in expm_oracle(init, model, damping, t, "minus"))
    dam, dbm = damped_ode_rhs(am, bm, "minus", model, damping)
    d_norm = 2 * np.real(np.conj(am) * dam + np.conj(bm) * dbm)
    g45 = damping.gamma_a * (am * np.conj(ap) - abs(am) ** 2) + damping.gamma_b * (bm * np.conj(bp) - abs(bm) ** 2)
    g46 = g_minus_only(am, bm, d_norm, damping)
    assert abs(g45 - g46) < 1e-10 * (1 + init.energy)
    assert abs(g_from_amplitudes(am, bm, ap, bp, damping) - g45) < 1e-10 * (1 + init.energy)


@settings(max_examples=100, deadline=None)
@given(coupling, coupling, coupling, rate, rate, amp, amp, amp, amp, st.floats(0, 10))
def test_G_real_part_non_positive(chi, om, k, ga, gb, ar, ai, br, bi, t):
    model = effective_model(chi=chi, Omega=om, kappa=k)
    init = InitialAmplitudes(complex(ar, ai), complex(br, bi))
    damping = DampingParams(ga, gb)
    if abs(damping.w(model)) < 1e-6:
        return
    assert np.real(decoherence_G(t, init, model, damping)) <= 1e-12


def test_f_examples():
    rec = decoherence_f(np.array([0.0, 1.0]), FIG6_INIT, FIG6, FIG6_DAMP)
    assert rec.f[0] == 1.0 and rec.log_f[0] == 0.0
    t = np.linspace(0, 30, 301)
    assert np.max(np.abs(decoherence_f(t, FIG6_INIT, FIG6, DampingParams()).f - 1)) < 1e-12


def test_f_symmetric_value():
    init = InitialAmplitudes(0, 2.0)
    damping = DampingParams(0.1, 0.1)
    closed = decoherence_f(1.0, init, SYM, damping).f
    eq = np.exp(symmetric_log_f(2.0, 1.0, 0.1, 1.0))
    quad = decoherence_f(1.0, init, SYM, damping, method="quadrature").f
    assert abs(closed) ** 2 == pytest.approx(0.6408, abs=5e-4)
    assert abs(closed - eq) < 1e-12
    assert abs(abs(quad) / abs(closed) - 1) < 1e-8
    assert abs(np.angle(quad) - np.angle(closed)) < 1e-8


def test_log_f_symmetric_formula_on_grid():
    t = np.linspace(0, 20, 401)
    lc = log_f_closed(InitialAmplitudes(0, 3.0), effective_model(chi=0.7, Omega=0.7, kappa=0.7),
                      DampingParams(0.05, 0.05), t)
    assert np.max(np.abs(lc - symmetric_log_f(3.0, 0.7, 0.05, t))) < 1e-11


@settings(max_examples=60, deadline=None)
@given(coupling, coupling, coupling, rate, rate, amp, amp, amp, amp)
def test_w_branch_invariance(chi, om, k, ga, gb, ar, ai, br, bi):
    model = effective_model(chi=chi, Omega=om, kappa=k)
    damping = DampingParams(ga, gb)
    w = damping.w(model)
    if abs(w) < 1e-3:
        return
    init = InitialAmplitudes(complex(ar, ai), complex(br, bi))
    t = np.linspace(0, 10, 21)
    a = log_f_closed(init, model, damping, t, w)
    b = log_f_closed(init, model, damping, t, -w)
    assert np.max(np.abs(a - b)) < 1e-10 * (1 + init.energy) / min(1.0, abs(w))


@settings(max_examples=60, deadline=None)
@given(coupling, coupling, coupling, rate, rate, amp, amp, amp, amp)
def test_visibility_never_amplified(chi, om, k, ga, gb, ar, ai, br, bi):
    model = effective_model(chi=chi, Omega=om, kappa=k)
    damping = DampingParams(ga, gb)
    if abs(damping.w(model)) < 1e-3:
        return
    init = InitialAmplitudes(complex(ar, ai), complex(br, bi))
    f = decoherence_f(np.linspace(0, 30, 61), init, model, damping).f
    assert np.all(np.abs(f) <= 1 + 1e-9)


def test_closed_vs_quadrature_complex_amplitudes():
    rng = np.random.default_rng(3)
    t = np.linspace(0, 10, 41)
    for _ in range(10):
        chi, om, k = rng.uniform(-1.5, 1.5, 3)
        ga, gb = rng.uniform(0, 0.2, 2)
        init = InitialAmplitudes(*(rng.uniform(-2, 2, 2) + 1j * rng.uniform(-2, 2, 2)))
        model = effective_model(chi=chi, Omega=om, kappa=k)
        damping = DampingParams(ga, gb)
        c = decoherence_f(t, init, model, damping).f
        q = decoherence_f(t, init, model, damping, method="quadrature").f
        assert np.max(np.abs(np.abs(q) / np.abs(c) - 1)) < 1e-8
        assert np.max(np.abs(np.angle(q / c))) < 1e-8


def test_qubit_decay_factor():
    t = np.linspace(0, 5, 11)
    base = decoherence_f(t, FIG6_INIT, FIG6, FIG6_DAMP)
    damping = DampingParams(0.001, 0.01, gamma_qubit=0.3)
    withq = decoherence_f(t, FIG6_INIT, FIG6, damping)
    assert np.allclose(withq.f, base.f * np.exp(-0.3 * t), rtol=1e-12)
    quad = decoherence_f(t, FIG6_INIT, FIG6, damping, method="quadrature")
    assert np.allclose(quad.f, withq.f, rtol=1e-8)


def test_degenerate_generator_falls_back():
    # Delta = 0 and |gamma_a - gamma_b| = 4 kappa make w vanish
    model = effective_model(chi=0.5, Omega=0.5, kappa=0.25)
    damping = DampingParams(1.0, 0.0)
    assert abs(damping.w(model)) < 1e-14
    init = InitialAmplitudes(1.0, 0.5)
    t = np.linspace(0, 6, 13)
    with pytest.warns(DegenerateGeneratorWarning):
        a, b = damped_amplitudes_closed(init, model, damping, t)
    ra, rb = expm_oracle(init, model, damping, t, "minus")
    assert np.allclose(a, ra, atol=1e-12) and np.allclose(b, rb, atol=1e-12)
    with pytest.warns(DegenerateGeneratorWarning):
        rec = decoherence_f(t, init, model, damping)
    assert rec.f[0] == 1.0 and np.all(np.abs(rec.f) <= 1 + 1e-9)
    with pytest.raises(DomainError):
        mode_coefficients(init, model, damping)


def test_short_time_examples():
    assert short_time_f(0.0, 2.0, 1.0, 0.1) == 1.0
    assert short_time_visibility(0.5, 2.0, 1.0, 0.1) == pytest.approx(math.exp(-0.4 / 3), rel=1e-14)
    assert short_time_visibility(0.5, 2.0, 1.0, 0.1) == pytest.approx(0.8752, abs=1e-4)
    t = np.linspace(0, 1, 11)
    assert np.allclose(np.abs(short_time_f(t, 2.0, 1.0, 0.1)) ** 2, short_time_visibility(t, 2.0, 1.0, 0.1))


@pytest.mark.parametrize("t", [1e-2, 1e-3])
def test_short_time_is_asymptotic(t):
    full = 2 * symmetric_log_f(2.0, 1.0, 0.1, t).real
    short = np.log(short_time_visibility(t, 2.0, 1.0, 0.1))
    assert full / short == pytest.approx(1.0, abs=0.01)


def test_short_time_law_invariant():
    t = np.linspace(1e-4, 0.099, 200)  # gamma t < 0.01
    init = InitialAmplitudes(0, 2.0)
    full = 2 * decoherence_f(t, init, SYM, DampingParams(0.1, 0.1)).log_f.real
    short = np.log(short_time_visibility(t, 2.0, 1.0, 0.1))
    assert np.all(np.abs(full - short) < 0.05 * np.abs(short) + 1e-12)


def test_p_minus_dissipative_examples():
    assert p_minus_dissipative(0.0, FIG6_INIT, FIG6, FIG6_DAMP) == 1.0
    t = np.linspace(0, 20, 1001)
    diss = p_minus_dissipative(t, FIG6_INIT, FIG6, DampingParams())
    assert np.max(np.abs(diss - p_minus(FIG6_INIT, FIG6, t))) < 1e-12


def test_fig6_revivals_decay():
    # non-dissipative revivals sit at multiples of 2 pi / (2 * 1.25)
    period = 2 * math.pi / 2.5
    heights = []
    for n in range(1, 6):
        tt = np.linspace(n * period - 0.05, n * period + 0.05, 2001)
        heights.append(np.max(p_minus_dissipative(tt, FIG6_INIT, FIG6, FIG6_DAMP)))
    assert all(h < 1 for h in heights)
    assert all(a > b for a, b in zip(heights, heights[1:]))


def test_fig6_first_revival_baseline():
    # frozen from this implementation; the quadrature route agrees to 3e-13
    t_peak = 2.511837815996364
    assert p_minus_dissipative(t_peak, FIG6_INIT, FIG6, FIG6_DAMP) == pytest.approx(0.9754617890511197, abs=1e-9)
    assert p_minus_dissipative(t_peak, FIG6_INIT, FIG6, FIG6_DAMP, method="quadrature") == pytest.approx(
        0.9754617890511197, abs=1e-9
    )


def test_sigma_x_expectation():
    assert sigma_x_expectation(0.0, FIG6_INIT, FIG6, FIG6_DAMP) == 1.0
    t = np.linspace(0, 10, 11)
    assert np.allclose(sigma_x_expectation(t, FIG6_INIT, FIG6, DampingParams()), 1.0, atol=1e-12)
    val = sigma_x_expectation(1.0, InitialAmplitudes(0, 2.0), SYM, DampingParams(0.1, 0.1))
    assert val == pytest.approx(np.exp(symmetric_log_f(2.0, 1.0, 0.1, 1.0)).real, abs=1e-12)
