import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spikesim.errors import ContractError
from spikesim.plasticity import (
    AlphaKernel,
    PerceptronRule,
    SaprRule,
    StdpRule,
    WeightBounds,
    WtaRule,
    apply_pairing,
    kernel_table,
    kernel_value,
    kernels_csv,
    perceptron_update,
    sapr_delta,
    stdp_delta,
    train_perceptron,
    wta_update,
)

positive_dt = st.floats(min_value=1e-3, max_value=500.0)


def test_kernel_examples():
    k = AlphaKernel(1.0, 5.0)
    assert kernel_value(k, 5.0) == pytest.approx(1.0)
    assert kernel_value(k, 0.0) == 0.0
    assert kernel_value(k, -3.0) == 0.0
    assert kernel_value(k, 10.0) == pytest.approx(0.73576, abs=1e-5)
    assert kernel_value(k, 10.0) == pytest.approx(2 / math.e, abs=1e-15)


def test_kernel_rejects_bad_tau():
    with pytest.raises(ValueError):
        AlphaKernel(1.0, 0.0)


def test_stdp_examples():
    r = StdpRule()
    assert stdp_delta(r, 5.0) == pytest.approx(0.0038940, abs=5e-8)
    assert stdp_delta(r, -5.0) == pytest.approx(-0.0040887, abs=5e-8)
    assert stdp_delta(r, 0.0) == 0.0


def test_sapr_examples():
    r = SaprRule()
    assert sapr_delta(r, r.epsp.tau) == pytest.approx(r.epsp.A)
    assert sapr_delta(r, -r.ipsp.tau) == pytest.approx(r.ipsp.A)
    assert sapr_delta(r, 0.0) == 0.0
    assert abs(sapr_delta(r, 0.01)) < 1e-4 and abs(sapr_delta(r, -0.01)) < 1e-4


@given(positive_dt)
def test_stdp_sign_structure(d):
    r = StdpRule()
    assert stdp_delta(r, d) > 0
    assert stdp_delta(r, -d) < 0


@given(positive_dt, positive_dt)
def test_stdp_decays_in_magnitude(a, b):
    lo, hi = sorted((a, b))
    if hi - lo < 1e-6:
        return
    r = StdpRule()
    assert abs(stdp_delta(r, hi)) < abs(stdp_delta(r, lo))
    assert abs(stdp_delta(r, -hi)) < abs(stdp_delta(r, -lo))


def test_stdp_vanishes_far_out():
    r = StdpRule()
    assert abs(stdp_delta(r, 100 * r.tau_plus)) < 1e-30
    assert abs(stdp_delta(r, -100 * r.tau_minus)) < 1e-30


def test_stdp_jump_at_zero():
    r = StdpRule()
    eps = 1e-12
    jump = stdp_delta(r, eps) - stdp_delta(r, -eps)
    assert abs(jump - (r.A_plus + r.A_minus)) < 1e-12


@given(positive_dt)
def test_sapr_sign_structure(d):
    r = SaprRule()
    up, down = sapr_delta(r, d), sapr_delta(r, -d)
    # the alpha tail underflows far out, so only require the sign where it is representable
    assert up >= 0 and down <= 0
    if d < 500:
        assert up > 0 and down < 0


@given(st.floats(min_value=1e-6, max_value=1.0))
def test_sapr_continuity_bound(eps):
    r = SaprRule()
    assert abs(sapr_delta(r, eps)) <= math.e * eps * r.epsp.A / r.epsp.tau + 1e-18
    assert abs(sapr_delta(r, -eps)) <= math.e * eps * abs(r.ipsp.A) / r.ipsp.tau + 1e-18


def test_sapr_decays_past_peak():
    r = SaprRule()
    tail = sapr_delta(r, np.linspace(r.epsp.tau, 100, 200))
    assert np.all(np.diff(tail) < 0)
    rise = sapr_delta(r, np.linspace(0.01, r.epsp.tau, 200))
    assert np.all(np.diff(rise) > 0)


def test_apply_pairing_examples():
    b = WeightBounds(0.0, 1.0)
    for rule in (StdpRule(), SaprRule()):
        assert apply_pairing(0.5, 5.0, rule, b) > 0.5
        assert apply_pairing(0.5, -5.0, rule, b) < 0.5
        assert apply_pairing(1.0, 5.0, rule, b) == 1.0


def test_apply_pairing_rejects_out_of_bounds():
    with pytest.raises(ContractError):
        apply_pairing(1.5, 5.0, StdpRule(), WeightBounds(0.0, 1.0))


def test_random_pairings_stay_bounded():
    rng = np.random.default_rng(1)
    bounds = WeightBounds(0.0, 1.0)
    big = StdpRule(A_plus=0.3, A_minus=0.3)
    for rule in (StdpRule(), SaprRule(), big):
        w = rng.random(1000)
        for dts in rng.uniform(-60, 60, size=(100, 1000)):
            w = apply_pairing(w, dts, rule, bounds)
            assert bounds.contains(w)


@given(st.lists(st.floats(-120, 120), max_size=60), st.floats(0, 1))
def test_pairing_sequence_bounded(dts, w0):
    w = w0
    for d in dts:
        w = apply_pairing(w, d, StdpRule(A_plus=0.4, A_minus=0.4), WeightBounds())
        assert 0.0 <= w <= 1.0


def test_wta_examples():
    win, W = wta_update([[0, 0], [1, 1]], [0.9, 0.9], WtaRule(eta=0.5))
    assert win == 1
    assert np.allclose(W[1], [0.95, 0.95]) and np.array_equal(W[0], [0, 0])
    win, W = wta_update([[0, 0], [1, 1]], [1, 1])
    assert win == 1 and np.array_equal(W[1], [1, 1])


def test_wta_tie_goes_to_lowest_index():
    win, _ = wta_update([[1, 0], [0, 1]], [0.5, 0.5])
    assert win == 0


def test_wta_neighbourhood():
    W0 = np.zeros((5, 2))
    _, W = wta_update(W0, [1.0, 1.0], WtaRule(eta=0.5, neighborhood_radius=0))
    assert np.count_nonzero(W.any(axis=1)) == 1
    W0[2] = [0.9, 0.9]
    win, W = wta_update(W0, [1.0, 1.0], WtaRule(eta=0.5, neighborhood_radius=1))
    assert win == 2 and list(np.flatnonzero(W.any(axis=1))) == [1, 2, 3]


def test_wta_dimension_mismatch():
    with pytest.raises(ValueError):
        wta_update([[0, 0]], [1, 2, 3])


@given(
    st.lists(st.lists(st.floats(-5, 5), min_size=3, max_size=3), min_size=1, max_size=6),
    st.lists(st.floats(-5, 5), min_size=3, max_size=3),
    st.floats(0.01, 1.0),
)
def test_wta_moves_winner_closer(W, x, eta):
    W = np.array(W)
    x = np.array(x)
    win, W2 = wta_update(W, x, WtaRule(eta=eta))
    before = np.linalg.norm(W[win] - x)
    after = np.linalg.norm(W2[win] - x)
    if before > 1e-6:
        assert after < before
    assert np.allclose(after, (1 - eta) * before)


def test_perceptron_examples():
    rule = PerceptronRule(eta=1.0, theta=0.5)
    assert np.array_equal(perceptron_update([0, 0], [1, 1], 1, rule), [1, 1])
    assert np.array_equal(perceptron_update([1, 1], [1, 1], 1, rule), [1, 1])
    w = perceptron_update([1, 1], [1, 0], 0, rule)
    assert np.array_equal(w, [0, 1])
    with pytest.raises(ValueError):
        perceptron_update([0, 0], [1, 1, 1], 1, rule)


def test_perceptron_learns_and():
    # third column is a constant input that plays the role of a bias
    X = [[0, 0, 1], [0, 1, 1], [1, 0, 1], [1, 1, 1]]
    targets = [0, 0, 0, 1]
    w, epochs, errors = train_perceptron(X, targets, PerceptronRule(eta=1.0, theta=0.5), max_epochs=100)
    assert errors == 0 and epochs <= 100
    assert [int(np.dot(w, x) >= 0.5) for x in X] == targets


def test_kernel_table_shape():
    dts, stdp, sapr = kernel_table()
    assert len(dts) == len(stdp) == len(sapr) == 201
    assert dts[0] == -50.0 and dts[-1] == 50.0 and dts[100] == 0.0
    text = kernels_csv()
    lines = text.strip().split("\n")
    assert lines[0] == "dt_ms,stdp,sapr"
    assert len(lines) == 202
