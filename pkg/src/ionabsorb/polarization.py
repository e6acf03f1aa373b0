"""Single-photon polarization states and Jones calculus.

States are kept as (H, V) amplitudes together with the propagation
direction, which is what decides whether a circular state drives sigma-plus
or sigma-minus transitions for a given quantization axis.  Handedness
convention: L = sigma-plus = (H + iV)/sqrt2 for light travelling along the
quantization axis, R = sigma-minus = (H - iV)/sqrt2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_S2 = np.sqrt(0.5)

_LABELS = {
    "H": (1.0, 0.0),
    "V": (0.0, 1.0),
    "D": (_S2, _S2),
    "A": (_S2, -_S2),
    "L": (_S2, 1j * _S2),
    "R": (_S2, -1j * _S2),
}


@dataclass(frozen=True)
class PolarizationState:
    h: complex
    v: complex
    direction: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        n = np.sqrt(abs(self.h) ** 2 + abs(self.v) ** 2)
        if n == 0:
            raise ValueError("zero polarization vector")
        object.__setattr__(self, "h", complex(self.h) / n)
        object.__setattr__(self, "v", complex(self.v) / n)
        d = np.asarray(self.direction, dtype=float)
        object.__setattr__(self, "direction", tuple(d / np.linalg.norm(d)))

    @classmethod
    def from_label(cls, label: str, direction=(0.0, 0.0, 1.0)) -> "PolarizationState":
        h, v = _LABELS[label.upper()]
        return cls(h, v, direction)

    @classmethod
    def from_vector(cls, vec, direction=(0.0, 0.0, 1.0)) -> "PolarizationState":
        return cls(complex(vec[0]), complex(vec[1]), direction)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.h, self.v], dtype=complex)

    def projector(self) -> np.ndarray:
        vec = self.vector
        return np.outer(vec, vec.conj())

    def sigma_components(self, axis=(0.0, 0.0, 1.0)) -> tuple[complex, complex]:
        """Amplitudes on (sigma+, sigma-) relative to ``axis``."""
        c = float(np.dot(self.direction, np.asarray(axis, dtype=float)))
        if abs(c) < 1e-9:
            raise ValueError("light propagating perpendicular to the axis has no sigma decomposition")
        plus = np.array([_S2, 1j * _S2])
        minus = plus.conj()
        if c < 0:
            plus, minus = minus, plus
        vec = self.vector
        return complex(np.vdot(plus, vec)), complex(np.vdot(minus, vec))

    @classmethod
    def from_sigma(cls, a_plus: complex, a_minus: complex, axis=(0.0, 0.0, 1.0),
                   direction=None) -> "PolarizationState":
        direction = tuple(axis) if direction is None else direction
        c = float(np.dot(direction, np.asarray(axis, dtype=float)))
        if abs(c) < 1e-9:
            raise ValueError("light propagating perpendicular to the axis has no sigma decomposition")
        plus = np.array([_S2, 1j * _S2])
        minus = plus.conj()
        if c < 0:
            plus, minus = minus, plus
        vec = a_plus * plus + a_minus * minus
        return cls(vec[0], vec[1], direction)

    def stokes(self) -> np.ndarray:
        """Normalized Stokes vector (S1, S2, S3): H, D and L are the +1 poles."""
        h, v = self.h, self.v
        return np.array([abs(h) ** 2 - abs(v) ** 2,
                         2 * (h.conjugate() * v).real,
                         2 * (h.conjugate() * v).imag])

    def poincare(self) -> tuple[float, float]:
        """(polar, azimuth) angles on the Poincare sphere, polar measured from H."""
        s1, s2, s3 = self.stokes()
        return float(np.arccos(np.clip(s1, -1, 1))), float(np.arctan2(s3, s2))

    @classmethod
    def from_poincare(cls, polar: float, azimuth: float, direction=(0.0, 0.0, 1.0)) -> "PolarizationState":
        return cls(np.cos(polar / 2), np.exp(1j * azimuth) * np.sin(polar / 2), direction)

    def transformed(self, jones: np.ndarray) -> "PolarizationState":
        vec = np.asarray(jones) @ self.vector
        return PolarizationState(vec[0], vec[1], self.direction)


def overlap(photon: PolarizationState, accepted: PolarizationState) -> float:
    """Probability that ``photon`` passes a projection onto ``accepted``."""
    return float(abs(np.vdot(accepted.vector, photon.vector)) ** 2)


absorption_polarization_overlap = overlap


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def waveplate(angle_deg: float, retardance: float) -> np.ndarray:
    """Jones matrix of a retarder with fast axis at ``angle_deg`` from H."""
    th = np.deg2rad(angle_deg)
    core = np.diag([np.exp(-0.5j * retardance), np.exp(0.5j * retardance)])
    return rotation(th) @ core @ rotation(-th)


def hwp(angle_deg: float) -> np.ndarray:
    return waveplate(angle_deg, np.pi)


def qwp(angle_deg: float) -> np.ndarray:
    return waveplate(angle_deg, np.pi / 2)


@dataclass(frozen=True)
class Analyzer:
    """Waveplates followed by a polarizer transmitting ``polarizer``.

    Light passes the quarter-wave plate first (if any), then the half-wave
    plate, then the polarizer.  ``state`` is the input polarization that is
    transmitted with certainty.
    """

    hwp_deg: float | None = None
    qwp_deg: float | None = None
    polarizer: str = "H"

    @property
    def jones(self) -> np.ndarray:
        m = np.eye(2, dtype=complex)
        if self.qwp_deg is not None:
            m = qwp(self.qwp_deg) @ m
        if self.hwp_deg is not None:
            m = hwp(self.hwp_deg) @ m
        return m

    @property
    def state(self) -> PolarizationState:
        target = PolarizationState.from_label(self.polarizer).vector
        return PolarizationState.from_vector(self.jones.conj().T @ target)

    def projector(self) -> np.ndarray:
        return self.state.projector()
