import numpy as np
import pytest
from hypothesis import given, strategies as st

from ionabsorb.polarization import (Analyzer, PolarizationState, absorption_polarization_overlap,
                                    hwp, overlap, qwp)

angles = st.floats(0, np.pi)
phases = st.floats(0, 2 * np.pi)


def test_labels_orthogonal():
    for a, b in (("H", "V"), ("D", "A"), ("L", "R")):
        pa, pb = PolarizationState.from_label(a), PolarizationState.from_label(b)
        assert overlap(pa, pb) == pytest.approx(0.0, abs=1e-15)
        assert overlap(pa, pa) == pytest.approx(1.0)


def test_sigma_examples():
    sp = PolarizationState.from_sigma(1, 0)
    sm = PolarizationState.from_sigma(0, 1)
    assert absorption_polarization_overlap(sp, sp) == pytest.approx(1.0)
    assert absorption_polarization_overlap(sp, sm) == pytest.approx(0.0, abs=1e-15)
    assert overlap(PolarizationState.from_label("H"), sp) == pytest.approx(0.5)
    assert overlap(PolarizationState.from_label("L"), sp) == pytest.approx(1.0)


def test_counter_propagating_swaps_helicity():
    L = PolarizationState.from_label("L", direction=(0, 0, -1))
    ap, am = L.sigma_components((0, 0, 1))
    assert abs(ap) == pytest.approx(0.0, abs=1e-15) and abs(am) == pytest.approx(1.0)


def test_perpendicular_axis_rejected():
    with pytest.raises(ValueError):
        PolarizationState.from_label("H").sigma_components((1, 0, 0))


@given(angles, phases)
def test_poincare_round_trip(theta, phi):
    p = PolarizationState.from_poincare(theta, phi)
    assert np.linalg.norm(p.vector) == pytest.approx(1.0, abs=1e-12)
    q = PolarizationState.from_poincare(*p.poincare())
    assert overlap(p, q) == pytest.approx(1.0, abs=1e-9)


@given(angles, phases)
def test_sigma_round_trip(theta, phi):
    p = PolarizationState.from_poincare(theta, phi)
    q = PolarizationState.from_sigma(*p.sigma_components())
    assert overlap(p, q) == pytest.approx(1.0, abs=1e-12)


@given(angles, phases)
def test_stokes_unit_and_overlap_identity(theta, phi):
    p = PolarizationState.from_poincare(theta, phi)
    s = p.stokes()
    assert np.dot(s, s) == pytest.approx(1.0, abs=1e-12)
    # |<a|b>|^2 = (1 + s_a . s_b) / 2
    h = PolarizationState.from_label("H")
    assert overlap(p, h) == pytest.approx((1 + s @ h.stokes()) / 2, abs=1e-12)


def test_stokes_poles():
    assert PolarizationState.from_label("H").stokes() == pytest.approx([1, 0, 0])
    assert PolarizationState.from_label("D").stokes() == pytest.approx([0, 1, 0])
    assert PolarizationState.from_label("L").stokes() == pytest.approx([0, 0, 1])


def test_waveplates():
    h = PolarizationState.from_label("H")
    assert overlap(h.transformed(hwp(22.5)), PolarizationState.from_label("D")) == pytest.approx(1.0)
    assert overlap(h.transformed(hwp(45)), PolarizationState.from_label("V")) == pytest.approx(1.0)
    circ = h.transformed(qwp(45))
    assert abs(circ.stokes()[2]) == pytest.approx(1.0)


@given(st.floats(0, 180))
def test_analyzer_transmits_its_state(theta):
    an = Analyzer(hwp_deg=theta)
    st_ = an.state
    assert np.vdot(st_.vector, an.projector() @ st_.vector).real == pytest.approx(1.0, abs=1e-12)
    # linear state at twice the plate angle
    assert overlap(st_, PolarizationState.from_vector([np.cos(np.radians(2 * theta)),
                                                        np.sin(np.radians(2 * theta))])) == pytest.approx(1.0)


def test_analyzer_with_qwp_reaches_circular():
    for th in (0.0, 45.0):
        s = Analyzer(hwp_deg=th, qwp_deg=45).state.stokes()
        assert abs(s[2]) == pytest.approx(1.0, abs=1e-12)


def test_state_normalized():
    p = PolarizationState(3, 4j)
    assert abs(p.h) ** 2 + abs(p.v) ** 2 == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        PolarizationState(0, 0)
