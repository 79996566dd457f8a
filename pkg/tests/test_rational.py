import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ainsim.channel import sample_channel
from ainsim.errors import ConfigurationError, DegenerateInputError, ParameterError
from ainsim.rational import (
    build_config,
    constellation_bound,
    monomial_directions,
    rate_lower_bound,
    rational_sweep,
    run_rational_batch,
    run_rational_trial,
)


def real_hops(seed):
    ch = sample_channel(seed, 2, 1, "constant_real")
    return ch, ch.scalar_hop(0).real, ch.scalar_hop(1).real


def test_hand_computed_monomials():
    F = np.array([[2.0, 3.0], [5.0, 7.0]])
    d = monomial_directions(F, F, 2)
    np.testing.assert_array_equal(d.v1, [14, 15])
    np.testing.assert_array_equal(d.v2, [10])
    assert F[0, 0] * d.v1[1] == 30 == F[0, 1] * d.v2[0]
    assert F[1, 0] * d.v1[0] == 70 == F[1, 1] * d.v2[0]
    np.testing.assert_array_equal(d.vr2, [-10])


def test_unit_channel_flagged_degenerate():
    d = monomial_directions(np.ones((2, 2)), np.ones((2, 2)), 3)
    np.testing.assert_array_equal(d.v1, [1, 1, 1])
    assert d.degenerate


def test_zero_entry_rejected():
    with pytest.raises(DegenerateInputError):
        monomial_directions(np.array([[0.0, 1], [1, 1]]), np.ones((2, 2)), 2)


@pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
def test_alignment_identities_numeric(m):
    for s in range(50):
        _, F, G = real_hops(s)
        d = monomial_directions(F, G, m)
        np.testing.assert_allclose(F[0, 0] * d.v1[1:], F[0, 1] * d.v2, rtol=1e-12)
        np.testing.assert_allclose(F[1, 0] * d.v1[:-1], F[1, 1] * d.v2, rtol=1e-12)
        np.testing.assert_allclose(G[0, 0] * d.vr1[1:], -G[0, 1] * d.vr2, rtol=1e-12)
        np.testing.assert_allclose(-G[1, 0] * d.vr1[:-1], G[1, 1] * d.vr2, rtol=1e-12)


def test_monomials_distinct_over_1000_channels():
    for s in range(1000):
        _, F, G = real_hops(s)
        assert not monomial_directions(F, G, 3).degenerate


def test_q_max_example():
    assert constellation_bound(2, 1.0, 0.1, 1e6) == 19
    assert math.floor(10 ** (6 * 0.9 / 4.2)) == 19


def test_m1_exponents():
    _, F, G = real_hops(1)
    cfg = build_config(1, 1.0, 0.3, 1e5, monomial_directions(F, G, 1))
    eps = 0.3
    assert cfg.q_max == math.floor(1e5 ** ((1 - eps) / (2 * (1 + eps))))
    xi = 1 / abs(cfg.directions.v1[0])
    assert cfg.a_norm * 1.0 * 1e5 ** ((1 - eps) / (2 * (1 + eps))) <= math.sqrt(1e5) * xi * (1 + 1e-12)


def test_worst_case_source_power_bound():
    for s in range(100):
        _, F, G = real_hops(s)
        for m in (2, 3):
            cfg = build_config(m, 1.0, 0.2, 1e8, monomial_directions(F, G, m))
            e = (1 - cfg.epsilon) / (m + cfg.epsilon)
            xi1 = np.sum(cfg.directions.v1 ** 2)
            xi2 = np.sum(cfg.directions.v2 ** 2)
            assert cfg.a_norm ** 2 * cfg.gamma ** 2 * max(xi1, xi2) * cfg.p ** e <= cfg.p * (1 + 1e-9)


def test_config_errors():
    _, F, G = real_hops(1)
    d = monomial_directions(F, G, 2)
    with pytest.raises(ConfigurationError):
        build_config(2, 0.5, 0.2, 1.5, d)
    with pytest.raises(ParameterError):
        build_config(2, 1.0, 1.5, 1e6, d)
    with pytest.raises(ParameterError):
        build_config(3, 1.0, 0.2, 1e6, d)


def test_rate_lower_bound_examples():
    assert rate_lower_bound(0.0, 19) == pytest.approx(math.log2(39) - 1)
    assert rate_lower_bound(0.0, 19) == pytest.approx(4.285, abs=1e-3)
    assert rate_lower_bound(1.0, 19) == 0.0
    assert rate_lower_bound(0.5, 1) == 0.0
    with pytest.raises(ParameterError):
        rate_lower_bound(1.5, 3)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 500))
def test_rate_bound_monotone_in_ser(a, b, q):
    lo, hi = sorted((a, b))
    assert rate_lower_bound(lo, q) >= rate_lower_bound(hi, q)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_noise_off_zero_errors(m):
    ch, F, G = real_hops(3)
    cfg = build_config(m, 1.0, 0.2, 1e8, monomial_directions(F, G, m))
    out = run_rational_trial(ch, cfg, seed=1, trials=1000, noise_var=0.0)
    assert out.relay_errors == (0, 0) and out.dest_symbol_errors == (0, 0)
    assert all(d > 0 for d in out.min_distance)


def test_genie_relays_exact_destinations():
    ch, F, G = real_hops(5)
    cfg = build_config(3, 1.0, 0.2, 1e6, monomial_directions(F, G, 3))
    out = run_rational_trial(ch, cfg, seed=2, trials=1000, noise_var=0.0, genie_relays=True)
    assert out.dest_symbol_errors == (0, 0)


def test_power_compliance_every_batch():
    for s in range(10):
        ch, F, G = real_hops(s)
        for p in (1e4, 1e8):
            cfg = build_config(2, 1.0, 0.2, p, monomial_directions(F, G, 2))
            out = run_rational_trial(ch, cfg, seed=s, trials=2000)
            assert max(out.source_power) <= p
            assert max(out.relay_peak_power) <= p * (1 + 1e-12)


def test_destination_ser_trend():
    ch, _, _ = real_hops(3)
    pts = rational_sweep(ch, 2, [1e4, 1e6, 1e8, 1e10], 5000, seed=0)
    ser = [sum(p.outcome.dest_symbol_errors) for p in pts]
    assert ser[-1] < ser[0]
    assert sum(b > a for a, b in zip(ser, ser[1:])) <= 1


def test_relay_ser_trend_m2_seed3():
    ch, _, _ = real_hops(3)
    lo, hi = rational_sweep(ch, 2, [1e4, 1e8], 10_000, seed=0)
    assert sum(hi.outcome.relay_errors) <= sum(lo.outcome.relay_errors)


def test_trial_requires_real_channel():
    ch = sample_channel(1, 2, 1)
    _, F, G = real_hops(1)
    cfg = build_config(2, 1.0, 0.2, 1e6, monomial_directions(F, G, 2))
    with pytest.raises(ParameterError):
        run_rational_trial(ch, cfg, 0)


def test_sweep_rows_have_csv_columns():
    ch, _, _ = real_hops(3)
    row = rational_sweep(ch, 2, [1e6], 100)[0].row()
    assert list(row) == ["P", "M", "gamma", "epsilon", "relay1_ser", "relay2_ser", "d1_ser", "d2_ser",
                         "rate_lb_1", "rate_lb_2"]
