import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meanfield_swarm.grid import Grid, ScalarField
from meanfield_swarm.metrics import (
    Diagnostics,
    IssBoundConfig,
    d_functional,
    fit_decay_rate,
    flattening_index,
    l2_error,
    liss_condition_margin,
    lyapunov,
)

G = Grid.cube(256, 1)


def dense_d_oracle_1d(eps, deps, n=10_000):
    """Brute-force d on an n-point refinement of (0, 1)."""
    x = (np.arange(n) + 0.5) / n
    e, de = eps(x), deps(x)
    sup = np.max(np.abs(de / (1 + e)))
    l2 = math.sqrt(np.mean((e / (1 + e)) ** 2))
    return max(sup, l2), sup


def test_l2_error_examples():
    p = ScalarField.constant(G, 1.0)
    assert l2_error(p, p) == 0
    x = G.centers(0)
    q = ScalarField(G, 1 + np.cos(np.pi * x))
    assert l2_error(q, p) == pytest.approx(math.sqrt(0.5), abs=1e-3)
    delta = 0.1 * np.sin(7 * x)
    a = l2_error(ScalarField(G, 1 + delta), p)
    b = l2_error(ScalarField(G, 1 + 2 * delta), p)
    assert b == pytest.approx(2 * a, rel=1e-14)
    assert lyapunov(q, p) == pytest.approx(0.5 * l2_error(q, p) ** 2, rel=1e-15)
    with pytest.raises(ValueError):
        l2_error(p, ScalarField.constant(Grid.cube(8, 1), 1.0))


def test_d_functional_constant_and_zero():
    assert d_functional(ScalarField.constant(G, 0.0)) == 0
    for c in (0.3, -0.4, 2.0):
        assert d_functional(ScalarField.constant(G, c)) == pytest.approx(abs(c / (1 + c)), rel=1e-14)
    with pytest.raises(ValueError):
        d_functional(ScalarField.constant(G, -1.0))


def test_d_functional_matches_dense_oracle():
    eps = ScalarField.from_function(G, lambda x: 0.1 * np.cos(np.pi * x))
    expected, _ = dense_d_oracle_1d(
        lambda x: 0.1 * np.cos(np.pi * x), lambda x: -0.1 * np.pi * np.sin(np.pi * x)
    )
    assert d_functional(eps) == pytest.approx(expected, rel=0.01)


def test_liss_margin_examples():
    cfg = IssBoundConfig(theta=0.5, poincare_C=1 / math.pi)
    rhs = 0.03 * 0.5 / ((1 / math.pi) * (0.03 - 0.0005))
    zero = ScalarField.constant(G, 0.0)
    assert liss_condition_margin(zero, 0.03, 0.0005, cfg) == pytest.approx(rhs, rel=1e-14)
    assert liss_condition_margin(zero, 0.02, 0.02, cfg) == math.inf
    eps = ScalarField.from_function(G, lambda x: 0.1 * np.cos(np.pi * x))
    _, sup = dense_d_oracle_1d(lambda x: 0.1 * np.cos(np.pi * x), lambda x: -0.1 * np.pi * np.sin(np.pi * x))
    margin = liss_condition_margin(eps, 0.03, 0.0005, cfg)
    assert margin == pytest.approx(rhs - sup, abs=0.01 * sup)
    # a steep error violates the bound
    steep = ScalarField.from_function(G, lambda x: 0.9 * np.cos(4 * np.pi * x))
    assert liss_condition_margin(steep, 0.03, 0.0005, cfg) < 0


def test_iss_config_validation():
    with pytest.raises(ValueError):
        IssBoundConfig(theta=1.0)
    with pytest.raises(ValueError):
        IssBoundConfig(poincare_C=0.0)


def test_fit_decay_rate_exact():
    t = np.linspace(0, 3, 50)
    assert fit_decay_rate(t, np.exp(-2 * t)) == pytest.approx(2.0, abs=1e-9)
    assert fit_decay_rate(t, 3 * np.exp(-0.5 * t)) == pytest.approx(0.5, abs=1e-9)
    pairs = np.stack([t, np.exp(-1.5 * t)], axis=1)
    assert fit_decay_rate(pairs) == pytest.approx(1.5, abs=1e-9)


def test_fit_decay_rate_noisy():
    t = np.linspace(0, 3, 50)
    rates = [
        fit_decay_rate(t, np.exp(-t) * (1 + 0.01 * np.random.default_rng(s).standard_normal(50)))
        for s in range(20)
    ]
    assert np.median(rates) == pytest.approx(1.0, abs=0.05)


def test_fit_decay_rate_errors():
    with pytest.raises(ValueError):
        fit_decay_rate(np.arange(5), np.ones(5))
    with pytest.raises(ValueError):
        fit_decay_rate(np.arange(12), np.r_[np.ones(11), 0.0])


def test_flattening_index():
    t = np.linspace(0, 10, 501)
    y = np.maximum(np.exp(-t), np.exp(-4))
    i = flattening_index(t, y)
    assert 3.5 <= t[i] <= 4.0
    assert flattening_index(t, np.exp(-t)) == len(t)


@settings(max_examples=50, deadline=None)
@given(
    a=st.floats(0.01, 0.49),
    gap=st.floats(0.01, 0.5),
    k=st.integers(1, 4),
    phase=st.floats(0, 2 * math.pi),
)
def test_d_functional_monotone_in_amplitude(a, gap, k, phase):
    b = min(a + gap, 0.5)
    g = Grid.cube(64, 1)
    shape = np.cos(k * math.pi * g.centers(0) + phase)
    da = d_functional(ScalarField(g, a * shape))
    db = d_functional(ScalarField(g, b * shape))
    assert da < db


def test_diagnostics_csv_roundtrip(tmp_path):
    d = Diagnostics()
    for k in range(5):
        d.append(0.02 * k, 1.0 / (k + 1), math.nan if k == 2 else 0.1, 1.0, 0.5, 3.0)
    assert len(d) == 5
    np.testing.assert_allclose(d.array("lyapunov"), 0.5 * d.array("l2_error") ** 2, rtol=1e-15)
    path = tmp_path / "diag.csv"
    d.to_csv(path)
    assert path.read_text().splitlines()[0] == "t,l2_error,lyapunov,d,mass,min_density,max_speed"
    back = Diagnostics.from_csv(path)
    for name in ("t", "l2_error", "lyapunov", "mass", "min_density", "max_speed"):
        assert np.array_equal(back.array(name), d.array(name))
    assert math.isnan(back.d[2])
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        Diagnostics.from_csv(path)
