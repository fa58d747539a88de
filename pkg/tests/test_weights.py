import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from maxrank.harness import emit_weight_plot
from maxrank.weights import (
    PAIR_C,
    TENT_A,
    TENT_B,
    WeightError,
    WeightFunction,
    canonical_pair,
    from_breakpoints,
    psi1_discrete,
    sample_curves,
    sample_grid,
    triangular,
    validate_pair,
)


def test_tent_constants():
    assert TENT_A + TENT_B == pytest.approx(8.0, abs=1e-13)
    assert TENT_A * TENT_B == pytest.approx(4.0, abs=1e-13)


def test_triangular_moments():
    m = triangular().moments
    assert m.psi1 == pytest.approx(1.0, abs=1e-15)
    assert m.psi2 == pytest.approx(1 / 12, abs=1e-15)
    assert m.psi3 == pytest.approx(1 / 4, abs=1e-15)
    assert m.psi4 == pytest.approx(1 / 24, abs=1e-15)


def test_canonical_pair_is_matched():
    g, h = canonical_pair()
    check = validate_pair(g, h)
    assert check
    assert max(abs(v) for v in check.residuals.values()) < 1e-13


def test_unmatched_pair_rejected():
    g, _ = canonical_pair()
    check = validate_pair(g, g)
    assert not check
    assert check.residuals["psi1"] == pytest.approx(-3 * g.moments.psi1)


def test_canonical_shape():
    g, h = canonical_pair()
    assert g(1 / (2 * PAIR_C)) == pytest.approx(0.5)
    assert np.all(g(np.linspace(1 / PAIR_C, 1, 20)) == 0)
    assert h(0.0) == 0.0
    assert h(1.0) == 0.0
    assert g(-0.1) == 0.0 and g(1.5) == 0.0


@pytest.mark.parametrize(
    "pts",
    [
        [(0, 0), (0.5, 1), (0.9, 0.5)],  # does not end at 1
        [(0, 0), (0.5, 1), (1, 0.2)],  # nonzero end
        [(0, 0), (0.5, 1), (0.5, 0.5), (1, 0)],  # repeated x
        [(0, 0), (1, 0)],  # identically zero
        [(0, 0), (0.5, float("nan")), (1, 0)],
    ],
)
def test_invalid_breakpoints(pts):
    with pytest.raises(WeightError):
        from_breakpoints(pts)


def test_text_round_trip(tmp_path):
    g, h = canonical_pair()
    g.save(tmp_path / "g.txt")
    back = WeightFunction.load(tmp_path / "g.txt")
    assert back.breakpoints == g.breakpoints
    assert back.moments == g.moments
    text = "# comment\n0 0\n\n0.5 0.5  # peak\n1 0\n"
    assert WeightFunction.from_text(text).moments.psi2 == pytest.approx(1 / 12)


def test_refine_keeps_function():
    g, _ = canonical_pair()
    r = g.refine(0.3).refine(0.95)
    x = np.linspace(0, 1, 101)
    np.testing.assert_allclose(r(x), g(x), atol=1e-15)
    for a, b in zip(r.moments.as_tuple(), g.moments.as_tuple()):
        assert a == pytest.approx(b, rel=1e-13)


def test_discrete_psi1_converges():
    g, _ = canonical_pair()
    errs = [abs(psi1_discrete(g, k) - g.moments.psi1) for k in (50, 500, 5000)]
    assert errs[-1] < 1e-2
    assert errs[0] > errs[-1]
    assert sample_grid(g, 10).shape == (9,)
    with pytest.raises(ValueError):
        sample_grid(g, 1)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0.01, 0.99), st.floats(-2, 2)), min_size=1, max_size=6, unique_by=lambda p: round(p[0], 3)))
def test_moments_match_quadrature(inner):
    pts = [(0.0, 0.0)] + sorted(inner) + [(1.0, 0.0)]
    xs = [p[0] for p in pts]
    if min(np.diff(xs)) < 1e-3 or all(abs(p[1]) < 1e-3 for p in inner):
        return
    w = from_breakpoints(pts)
    brk = xs[1:-1]
    psi2 = quad(lambda s: w(s) ** 2, 0, 1, points=brk, limit=200)[0]
    psi3 = quad(lambda s: w(s), 0, 1, points=brk, limit=200)[0]
    psi4 = quad(lambda s: s * w(s) ** 2, 0, 1, points=brk, limit=200)[0]
    slopes = np.diff([p[1] for p in pts]) / np.diff(xs)
    psi1 = float(np.sum(slopes**2 * np.diff(xs)))
    m = w.moments
    assert m.psi1 == pytest.approx(psi1, rel=1e-10, abs=1e-12)
    assert m.psi2 == pytest.approx(psi2, rel=1e-8, abs=1e-12)
    assert m.psi3 == pytest.approx(psi3, rel=1e-8, abs=1e-12)
    assert m.psi4 == pytest.approx(psi4, rel=1e-8, abs=1e-12)


def test_weight_plot_file(tmp_path):
    g, h = canonical_pair()
    out = emit_weight_plot(g, h, 11, tmp_path / "w.csv")
    rows = out.read_text().splitlines()
    assert rows[0] == "x,g_c,h_c"
    assert len(rows) == 12
    x, (gv, hv) = sample_curves((g, h), 11)
    last = [float(v) for v in rows[-1].split(",")]
    assert last == [x[-1], gv[-1], hv[-1]]
    with pytest.raises(ValueError):
        sample_curves((g,), 1)
