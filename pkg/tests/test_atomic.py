from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, optimize

from ionabsorb.atomic import (MU_B_MHZ_PER_GAUSS, MagneticField, Sublevel, TransitionTable,
                              absorption_lineshape, clebsch_gordan, default_levels, default_table,
                              lorentzian, relative_scheme_efficiency, sigma_line_offsets,
                              transition_coupling, zeeman_shift)

F = Fraction


def test_gj_values():
    lv = default_levels()
    got = [lv[t].gJ for t in ("S1/2", "D3/2", "D5/2", "P1/2", "P3/2")]
    assert got == pytest.approx([2, 4 / 5, 6 / 5, 2 / 3, 4 / 3], abs=1e-15)


def test_sublevel_counts():
    for lv in default_levels().values():
        assert len(lv.sublevels()) == 2 * lv.J + 1


def test_bad_sublevel():
    with pytest.raises(ValueError):
        Sublevel(default_levels()["S1/2"], F(3, 2))
    with pytest.raises(ValueError):
        Sublevel(default_levels()["D5/2"], 1)


def test_zeeman_examples():
    lv = default_levels()
    assert zeeman_shift(Sublevel(lv["S1/2"], F(1, 2)), MagneticField(1.0)) == pytest.approx(1.399624, abs=1e-12)
    assert zeeman_shift(Sublevel(lv["P3/2"], F(1, 2)), MagneticField(5.0)) == pytest.approx(
        4 / 3 * 0.5 * 5 * MU_B_MHZ_PER_GAUSS)
    for term in lv:
        for sub in lv[term].sublevels():
            assert zeeman_shift(sub, MagneticField(0.0)) == 0.0


def test_field_validation():
    with pytest.raises(ValueError):
        MagneticField(-1.0)
    B = MagneticField(1.0, (0, 3, 4))
    assert np.linalg.norm(B.axis) == pytest.approx(1.0, abs=1e-12)


def test_branching_sums():
    t = default_table()
    for upper in ("P1/2", "P3/2"):
        s = sum(tr.branching for (u, _), tr in t.entries.items() if u == upper)
        assert s == pytest.approx(1.0, abs=1e-9)
    assert t.branching("P3/2", "D5/2") == 0.059
    assert t.branching("P3/2", "D3/2") == 0.0066
    assert t.strength_ratio == 6.0


def test_bad_branching_rejected():
    with pytest.raises(ValueError):
        TransitionTable({("P3/2", "S1/2"): 0.9})


def test_unknown_line():
    lv = default_levels()
    with pytest.raises(KeyError):
        transition_coupling(Sublevel(lv["D5/2"], F(1, 2)), Sublevel(lv["P1/2"], F(1, 2)), 0)


def test_coupling_selection_rules():
    lv = default_levels()
    d, p = lv["D5/2"], lv["P3/2"]
    # mismatched q
    assert transition_coupling(Sublevel(d, F(1, 2)), Sublevel(p, F(1, 2)), 1) == 0.0
    # |dm| > 1
    assert transition_coupling(Sublevel(d, F(-3, 2)), Sublevel(p, F(3, 2)), 1) == 0.0
    a = transition_coupling(Sublevel(d, F(-3, 2)), Sublevel(p, F(-1, 2)), +1)
    b = transition_coupling(Sublevel(d, F(3, 2)), Sublevel(p, F(1, 2)), -1)
    assert a == pytest.approx(b, abs=1e-15) and a > 0


@pytest.mark.parametrize("line", [("P3/2", "D5/2"), ("P3/2", "D3/2"), ("P3/2", "S1/2"),
                                  ("P1/2", "S1/2"), ("P1/2", "D3/2")])
def test_coupling_sums_per_upper_sublevel(line):
    t = default_table()
    lv = t.levels
    up, lo = lv[line[0]], lv[line[1]]
    for su in up.sublevels():
        total = sum(transition_coupling(sl, su, q, t) for sl in lo.sublevels() for q in (-1, 0, 1))
        assert total == pytest.approx(1.0, abs=1e-9)
        for (ml, mu, q), w in t[line].couplings.items():
            assert q == mu - ml and w > 0


def test_cg_orthonormality():
    # sum over m1, m2 of <j1 m1 j2 m2|J M><j1 m1 j2 m2|J' M> = delta_JJ'
    j1, j2 = F(5, 2), 1
    for M in (F(-1, 2), F(1, 2), F(3, 2)):
        for J in (F(3, 2), F(5, 2), F(7, 2)):
            for J2 in (F(3, 2), F(5, 2), F(7, 2)):
                if abs(M) > J or abs(M) > J2:
                    continue
                s = sum(clebsch_gordan(j1, m1, j2, M - m1, J, M) * clebsch_gordan(j1, m1, j2, M - m1, J2, M)
                        for m1 in (j1 - k for k in range(int(2 * j1) + 1)) if abs(M - m1) <= 1)
                assert s == pytest.approx(1.0 if J == J2 else 0.0, abs=1e-12)


def test_lineshape_examples():
    assert absorption_lineshape(0, 22, 22) == 1.0
    assert absorption_lineshape(22, 22, 22) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        absorption_lineshape(0, 0, 22)
    with pytest.raises(ValueError):
        absorption_lineshape(0, 22, -1)


def _numeric_conv_fwhm(a, b):
    def conv(x):
        f = lambda y: lorentzian(y, a) * lorentzian(x - y, b)
        return integrate.quad(f, -np.inf, np.inf, limit=400)[0]
    peak = conv(0.0)
    return 2 * optimize.brentq(lambda x: conv(x) - peak / 2, 1e-6, 10 * (a + b))


def test_convolution_fwhm_oracle():
    assert _numeric_conv_fwhm(22, 22) == pytest.approx(44.0, rel=1e-6)


@given(st.floats(1, 50), st.floats(1, 50), st.floats(-200, 200))
def test_lineshape_matches_numeric_convolution(a, b, x):
    width = a + b
    assert absorption_lineshape(x, a, b) == pytest.approx(1 / (1 + (2 * x / width) ** 2), rel=1e-12)


def test_convolution_random_widths():
    rng = np.random.default_rng(3)
    for a, b in rng.uniform(2, 40, size=(3, 2)):
        assert _numeric_conv_fwhm(a, b) == pytest.approx(a + b, rel=1e-5)


def test_scheme_efficiency():
    assert relative_scheme_efficiency() == pytest.approx(6 * 0.9344 / 0.059)


def test_sigma_line_offsets_symmetry():
    B = MagneticField(3.0)
    up = sigma_line_offsets(+1, B)
    dn = sigma_line_offsets(-1, B)
    assert sum(w for _, w in up) == pytest.approx(1.0)
    assert sorted(s for s, _ in up) == pytest.approx(sorted(-s for s, _ in dn))
    assert all(s < 0 for s, _ in up)
    assert all(s == 0 for s, _ in sigma_line_offsets(+1, MagneticField(0.0)))


def test_report_mentions_constants():
    text = default_table().report()
    assert "0.0590" in text and "1.399624" in text
