import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spikesim.errors import InstabilityError
from spikesim.integrators import integrate_fixed, rk4_step
from spikesim.neurons import (
    HHParams,
    HHState,
    IzhParams,
    IzhState,
    McGregorParams,
    McGregorState,
    RefractoryConfig,
    ThresholdUnit,
    hh_derivatives,
    hh_rates,
    hh_rest_state,
    hh_rhs,
    hh_step,
    izh_derivatives,
    izh_params_from_gamma,
    izhikevich_step,
    izhikevich_step_bounded,
    mcgregor_derivatives,
    mcgregor_rest_state,
    mcgregor_step,
    mp_fire,
    sample_izh_params,
    simulate_hh,
    simulate_izhikevich,
)

# --------------------------------------------------------------------------
# Threshold unit


def test_mp_fire_examples():
    conj = ThresholdUnit((1, 1, 1), 3)
    assert mp_fire(conj, (1, 1, 1)) == 1
    assert mp_fire(conj, (1, 1, 0)) == 0
    assert mp_fire(ThresholdUnit((1, 1, 1), 1), (0, 1, 0)) == 1


def test_mp_fire_length_mismatch():
    with pytest.raises(ValueError):
        mp_fire(ThresholdUnit((1, 1), 1), (1, 1, 1))


@given(
    st.lists(st.floats(0, 5), min_size=1, max_size=8).flatmap(
        lambda w: st.tuples(
            st.just(w),
            st.lists(st.floats(0, 5), min_size=len(w), max_size=len(w)),
            st.integers(0, len(w) - 1),
            st.floats(0, 5),
        )
    ),
    st.floats(-5, 20),
)
def test_mp_fire_monotone(case, theta):
    w, x, idx, extra = case
    unit = ThresholdUnit(tuple(w), theta)
    if mp_fire(unit, x):
        bumped = list(x)
        bumped[idx] += extra
        assert mp_fire(unit, bumped) == 1


# --------------------------------------------------------------------------
# Hodgkin-Huxley, checked against an independent transcription of the
# shifted-convention rate functions.


def _oracle_rates(V):
    def lim(x, scale):
        return scale if x == 0 else x / (math.exp(x / scale) - 1)

    return (
        0.01 * lim(10 - V, 10),
        0.125 * math.exp(-V / 80),
        0.1 * lim(25 - V, 10),
        4 * math.exp(-V / 18),
        0.07 * math.exp(-V / 20),
        1 / (math.exp((30 - V) / 10) + 1),
    )


def _oracle_dv_at_rest(V, p=HHParams()):
    an, bn, am, bm, ah, bh = _oracle_rates(V)
    n, m, h = an / (an + bn), am / (am + bm), ah / (ah + bh)
    return (-p.gK_bar * n**4 * (V - p.EK) - p.gNa_bar * m**3 * h * (V - p.ENa) - p.gL * (V - p.EL)) / p.C


def _bisect(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_hh_rate_limits():
    r = hh_rates(10.0)
    assert r[0] == pytest.approx(0.1, abs=1e-12)
    assert hh_rates(25.0)[2] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("V", [-20.0, -5.0, 0.0, 3.3, 9.999, 10.0, 10.001, 25.0, 40.0, 100.0])
def test_hh_rates_match_oracle(V):
    assert np.allclose(np.asarray(hh_rates(V), dtype=float), _oracle_rates(V), rtol=1e-9, atol=1e-12)


def test_hh_rest_matches_bisection_oracle():
    v_oracle = _bisect(_oracle_dv_at_rest, -30.0, 30.0)
    rest = hh_rest_state()
    assert rest.V == pytest.approx(v_oracle, abs=1e-9)
    assert abs(hh_derivatives(rest, HHParams(), 0.0)[0]) < 1e-6


def test_hh_potassium_reversal_zero():
    p = HHParams(gL=0.0)
    d = hh_derivatives(HHState(p.EK, 1.0, 0.0, 0.0), p, 0.0)
    assert d[0] == pytest.approx(0.0, abs=1e-12)


def test_hh_current_offset_scales_with_capacitance():
    p = HHParams(C=2.0)
    s = hh_rest_state()
    d0 = hh_derivatives(s, p, 0.0)[0]
    d1 = hh_derivatives(s, p, 10.0)[0]
    assert d1 - d0 == pytest.approx(10.0 / 2.0, abs=1e-12)


def test_hh_step_matches_generic_rk4():
    p = HHParams()
    s = HHState(5.0, 0.4, 0.1, 0.5)
    fast, _ = hh_step(s, p, 7.0, 0.01)
    ref = rk4_step(lambda t, y: hh_rhs(y, p, 7.0), 0.0, s.as_array(), 0.01)
    assert np.allclose(fast.as_array(), ref, rtol=0, atol=1e-12)


def test_hh_quiet_at_rest():
    spikes, peak, _, _ = simulate_hh(HHParams(), 0.0, 50.0)
    assert spikes == []
    assert peak < 1.0


def test_hh_tonic_spiking_and_peak():
    spikes, peak, _, _ = simulate_hh(HHParams(), 10.0, 100.0, dt=0.01)
    assert len(spikes) >= 3
    assert 90.0 <= peak <= 110.0


def test_hh_spike_count_converged():
    coarse = simulate_hh(HHParams(), 10.0, 100.0, dt=0.01)[0]
    fine = simulate_hh(HHParams(), 10.0, 100.0, dt=0.001)[0]
    assert len(coarse) == len(fine)


def _pulses(amp, starts, width=1.0):
    return lambda t: amp if any(s <= t < s + width for s in starts) else 0.0


def _threshold_amplitude():
    # smallest 1 ms pulse amplitude that evokes a spike, to 0.1 uA/cm^2
    lo, hi = 0.0, 100.0
    while hi - lo > 0.1:
        mid = 0.5 * (lo + hi)
        if simulate_hh(HHParams(), _pulses(mid, [5.0]), 30.0)[0]:
            hi = mid
        else:
            lo = mid
    return hi


def test_hh_refractory_second_pulse():
    amp = _threshold_amplitude() * 1.05
    single = simulate_hh(HHParams(), _pulses(amp, [5.0]), 40.0)[0]
    paired = simulate_hh(HHParams(), _pulses(amp, [5.0, 8.0]), 40.0)[0]
    far = simulate_hh(HHParams(), _pulses(amp, [5.0, 45.0]), 80.0)[0]
    assert len(single) == 1
    assert len(paired) == 1  # second pulse falls in the refractory period
    assert len(far) == 2  # control: recovered after a long gap


@pytest.mark.parametrize("Ie", [0.0, 5.0, 10.0, 20.0])
def test_hh_gates_bounded(Ie):
    p = HHParams()
    s = hh_rest_state(p)
    for _ in range(20000):
        s, _ = hh_step(s, p, Ie, 0.01)
        assert 0.0 <= s.n <= 1.0 and 0.0 <= s.m <= 1.0 and 0.0 <= s.h <= 1.0


def test_hh_rest_is_stable():
    p = HHParams()
    _, _, s, trace = simulate_hh(p, 0.0, 100.0, record=True)
    _, _, s2, trace2 = simulate_hh(p, 0.0, 100.0, state=s, record=True)
    assert max(abs(v - s.V) for _, v in trace2) < 0.01


def test_hh_dt_cap_and_blowup():
    with pytest.raises(ValueError):
        hh_step(hh_rest_state(), HHParams(), 0.0, 0.1)
    with pytest.raises(InstabilityError):
        hh_step(HHState(0.0, 0.3, 0.05, 0.6), HHParams(), 1e7, 0.05)


# --------------------------------------------------------------------------
# McGregor


def test_mcgregor_derivative_examples():
    p = McGregorParams()
    d = mcgregor_derivatives(McGregorState(E=4.0, GK=0.0, Th=p.Th0), p)
    assert d[0] == pytest.approx(-4.0 / p.Tmem)
    assert mcgregor_derivatives(McGregorState(0.0, 0.0, p.Th0), p)[2] == 0.0
    assert mcgregor_derivatives(McGregorState(0.0, 2.5, p.Th0), p)[1] == pytest.approx(-2.5 / p.TGK)


def test_mcgregor_rejects_negative_conductance():
    with pytest.raises(ValueError):
        mcgregor_derivatives(mcgregor_rest_state(), McGregorParams(), Ge=-1.0)


def test_mcgregor_exponential_decay():
    p = McGregorParams()
    s = McGregorState(E=5.0, GK=0.0, Th=50.0)
    for k in range(1, 301):
        s, _ = mcgregor_step(s, p, dt=0.1)
        exact = 5.0 * math.exp(-k * 0.1 / p.Tmem)
        assert abs(s.E - exact) <= 0.01 * exact


def test_mcgregor_threshold_relaxes():
    p = McGregorParams()
    s = McGregorState(E=0.0, GK=0.0, Th=p.Th0 + 8.0)
    y = integrate_fixed(lambda t, y: np.array([0.0, 0.0, -(y[2] - p.Th0) / p.TTh]), s.as_array(), 0.1, 5 * p.TTh)
    for _ in range(int(round(5 * p.TTh / 0.1))):
        s, _ = mcgregor_step(s, p, dt=0.1)
    assert abs(s.Th - p.Th0) <= 0.01 * p.Th0
    assert s.Th == pytest.approx(y[2], rel=1e-9)


def test_mcgregor_crossing_spikes():
    p = McGregorParams()
    s = McGregorState(E=p.Th0 - 0.1, GK=0.0, Th=p.Th0)
    s2, spiked = mcgregor_step(s, p, Ge=5.0, dt=0.1)
    assert spiked and s2.E >= s2.Th and s2.fired_last_step


def test_mcgregor_threshold_adapts_under_drive():
    p = McGregorParams()
    s = mcgregor_rest_state(p)
    peak_th, n = s.Th, 0
    for _ in range(1000):
        s, spiked = mcgregor_step(s, p, SCN=20.0, dt=0.1)
        n += spiked
        peak_th = max(peak_th, s.Th)
    assert n >= 1
    assert peak_th > p.Th0 + 1.0


# --------------------------------------------------------------------------
# Izhikevich


def test_izh_fixed_point():
    d = izh_derivatives(IzhState(-70.0, -14.0), IzhParams(0.02, 0.2, -65.0, 8.0), 0.0)
    assert abs(d[0]) < 1e-12 and abs(d[1]) < 1e-12
    s, spiked = izhikevich_step(IzhState(-70.0, -14.0), IzhParams(), 0.0)
    assert (s.v, s.u, spiked) == pytest.approx((-70.0, -14.0, False), abs=1e-12)


def test_izh_reset():
    p = IzhParams()
    s, spiked = izhikevich_step(IzhState(31.0, 0.0), p, 0.0, 0.1)
    # 31 + 0.1*dv stays above 30, so it resets
    assert spiked and s.v == -65.0
    u_euler = 0.0 + 0.1 * p.a * (p.b * 31.0 - 0.0)
    assert s.u == pytest.approx(u_euler + 8.0)


def test_izh_bounded_examples():
    p = IzhParams()
    r = RefractoryConfig(2.0)
    s, spiked = izhikevich_step_bounded(IzhState(31.0, 0.0, last_spike=9.5), p, 0.0, 0.1, r, now=10.0)
    assert not spiked and s.v == 30.0
    s, spiked = izhikevich_step_bounded(IzhState(31.0, 0.0, last_spike=5.0), p, 0.0, 0.1, r, now=10.0)
    assert spiked and s.v == p.c and s.last_spike == 10.0
    s, spiked = izhikevich_step_bounded(IzhState(31.0, 0.0), p, 0.0, 0.1, r, now=10.0)
    assert spiked


def test_izh_param_table():
    assert izh_params_from_gamma("excitatory", 0.0) == IzhParams(0.02, 0.2, -65.0, 8.0)
    assert izh_params_from_gamma("excitatory", 1.0) == IzhParams(0.02, 0.2, -50.0, 2.0)
    assert izh_params_from_gamma("inhibitory", 0.0) == IzhParams(0.02, 0.25, -65.0, 2.0)
    with pytest.raises(ValueError):
        izh_params_from_gamma("modulatory", 0.5)


def test_sample_izh_params_reproducible():
    a = [sample_izh_params("excitatory", np.random.default_rng(7)) for _ in range(3)]
    b = [sample_izh_params("excitatory", np.random.default_rng(7)) for _ in range(3)]
    assert a == b


@given(st.integers(0, 2**32 - 1), st.sampled_from(["excitatory", "inhibitory"]))
def test_sampled_params_inside_table(seed, kind):
    p = sample_izh_params(kind, np.random.default_rng(seed))
    lo, hi = izh_params_from_gamma(kind, 0.0), izh_params_from_gamma(kind, 1.0)
    for f in ("a", "b", "c", "d"):
        x, y = sorted((getattr(lo, f), getattr(hi, f)))
        assert x - 1e-12 <= getattr(p, f) <= y + 1e-12


SWEEP = (5.0, 10.0, 20.0, 40.0, 80.0, 160.0)


def test_izh_rate_monotone_and_unbounded_isi():
    p = izh_params_from_gamma("excitatory", 0.0)
    trains = [simulate_izhikevich(p, I, 500.0, 0.1) for I in SWEEP]
    counts = [len(t) for t in trains]
    assert counts == sorted(counts)
    assert min(np.diff(trains[-1])) < 2.0


def test_izh_bounded_sweep_respects_dt_min():
    p = izh_params_from_gamma("excitatory", 0.0)
    for I in SWEEP:
        spikes = simulate_izhikevich(p, I, 500.0, 0.1, RefractoryConfig(2.0))
        assert len(spikes) > 0
        assert all(d >= 2.0 for d in np.diff(spikes))


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 200), st.floats(1.0, 5.0))
def test_izh_bounded_any_current(I, dt_min):
    spikes = simulate_izhikevich(IzhParams(), I, 100.0, 0.1, RefractoryConfig(dt_min))
    assert all(d >= dt_min for d in np.diff(spikes))


def test_izh_dt_cap():
    with pytest.raises(ValueError):
        izhikevich_step(IzhState(-65.0, -13.0), IzhParams(), 0.0, 0.5)
