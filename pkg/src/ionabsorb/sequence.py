"""Laser / RF pulse sequences for pulsed experiments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Pulse:
    name: str
    duration: float
    lasers: tuple[str, ...] = ()
    polarization: str | None = None
    detuning: float = 0.0
    area: float | None = None
    # for 729 nm pulses: (2 m_S, 2 m_D) of the coupled pair
    target: tuple[int, int] | None = None
    detect: bool = False

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"pulse {self.name!r} needs a positive duration")


@dataclass(frozen=True)
class PulseSequence:
    pulses: tuple[Pulse, ...]

    def __post_init__(self):
        object.__setattr__(self, "pulses", tuple(self.pulses))
        if not self.pulses:
            raise ValueError("empty pulse sequence")

    @property
    def duration(self) -> float:
        return float(sum(p.duration for p in self.pulses))

    def offsets(self) -> list[float]:
        return [0.0] + list(np.cumsum([p.duration for p in self.pulses])[:-1])

    def detection_window(self) -> tuple[float, float]:
        """(offset, length) of the single gated detection phase."""
        found = [(o, p.duration) for o, p in zip(self.offsets(), self.pulses) if p.detect]
        if len(found) != 1:
            raise ValueError(f"sequence needs exactly one detection phase, found {len(found)}")
        return found[0]

    @classmethod
    def pulsed_absorption(cls, cooling: float = 5e-3, pumping: float = 0.2e-3,
                          detection: float = 2e-3, sign: int = +1) -> "PulseSequence":
        """Cool, pump to the outer D5/2 sublevels, then watch for fluorescence.

        ``sign = +1`` pumps to the upper sublevels (ion then absorbs
        sigma-minus), ``-1`` to the lower ones.
        """
        pol = "sigma+" if sign > 0 else "sigma-"
        return cls((
            Pulse("cool", cooling, ("397", "866", "850", "854")),
            Pulse("pump", pumping, ("854",), polarization=pol),
            Pulse("detect", detection, ("397", "866"), detect=True),
        ))

    @classmethod
    def state_transfer(cls, cooling: float = 5e-3, exposure: float = 1e-3,
                       area_error: float = 0.0) -> "PulseSequence":
        """Cooling, sigma- pumping, RF pi/2, two 729 nm pi pulses, 854 nm exposure."""
        f = 1.0 + area_error
        return cls((
            Pulse("cool", cooling, ("397", "866")),
            Pulse("pump397", 20e-6, ("397", "866"), polarization="sigma-"),
            Pulse("rf", 10e-6, ("rf",), area=f * np.pi / 2),
            Pulse("729a", 10e-6, ("729",), area=f * np.pi, target=(-1, -3)),
            Pulse("729b", 10e-6, ("729",), area=f * np.pi, target=(1, 3)),
            Pulse("expose", exposure, (), detect=True),
        ))
