"""Static level structure of 40Ca+.

Levels, Zeeman shifts, decay branching, dipole coupling weights between
Zeeman sublevels and the absorption lineshape seen by a narrowband photon.
Everything here is a pure function of immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping

import numpy as np

#: Bohr magneton over Planck constant, MHz per gauss.
MU_B_MHZ_PER_GAUSS = 1.399624

TERMS = ("S1/2", "P1/2", "P3/2", "D3/2", "D5/2")


@dataclass(frozen=True)
class Level:
    term: str
    J: Fraction
    gJ: float
    lifetime: float = math.inf

    def __post_init__(self):
        if self.term not in TERMS:
            raise ValueError(f"unknown term {self.term!r}")

    @property
    def multiplicity(self) -> int:
        return int(2 * self.J + 1)

    def sublevels(self) -> list["Sublevel"]:
        return [Sublevel(self, -self.J + k) for k in range(self.multiplicity)]


@dataclass(frozen=True)
class Sublevel:
    level: Level
    m: Fraction

    def __post_init__(self):
        m = Fraction(self.m)
        object.__setattr__(self, "m", m)
        if abs(m) > self.level.J or (m - self.level.J).denominator != 1:
            raise ValueError(f"m={m} not a sublevel of {self.level.term}")


def default_levels(d52_lifetime: float = 1.11, d32_lifetime: float = 1.0) -> dict[str, Level]:
    """Levels keyed by term.

    The D5/2 lifetime default is the measured dark-period constant; the D3/2
    value only needs to be of order one second.  P lifetimes are literature
    values and play no role in the simulations.
    """
    return {
        "S1/2": Level("S1/2", Fraction(1, 2), 2.0),
        "P1/2": Level("P1/2", Fraction(1, 2), 2.0 / 3.0, 7.1e-9),
        "P3/2": Level("P3/2", Fraction(3, 2), 4.0 / 3.0, 6.9e-9),
        "D3/2": Level("D3/2", Fraction(3, 2), 4.0 / 5.0, d32_lifetime),
        "D5/2": Level("D5/2", Fraction(5, 2), 6.0 / 5.0, d52_lifetime),
    }


@dataclass(frozen=True)
class MagneticField:
    magnitude: float = 3.0
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.magnitude < 0:
            raise ValueError("field magnitude must be >= 0")
        n = float(np.linalg.norm(self.axis))
        if n == 0:
            raise ValueError("field axis must be nonzero")
        object.__setattr__(self, "axis", tuple(float(a) / n for a in self.axis))


def zeeman_shift(sub: Sublevel, B: MagneticField) -> float:
    """Linear Zeeman shift of a sublevel in MHz."""
    return sub.level.gJ * float(sub.m) * MU_B_MHZ_PER_GAUSS * B.magnitude


# -- Clebsch-Gordan ---------------------------------------------------------

def _fact(x: Fraction) -> int:
    if x.denominator != 1 or x < 0:
        raise ValueError
    return math.factorial(int(x))


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """<j1 m1; j2 m2 | J M> by the Racah formula (Condon-Shortley phases)."""
    j1, m1, j2, m2, J, M = (Fraction(v) for v in (j1, m1, j2, m2, J, M))
    if m1 + m2 != M:
        return 0.0
    if abs(m1) > j1 or abs(m2) > j2 or abs(M) > J:
        return 0.0
    if J < abs(j1 - j2) or J > j1 + j2 or (j1 + j2 + J).denominator != 1:
        return 0.0
    pre = (2 * J + 1) * _fact(J + j1 - j2) * _fact(J - j1 + j2) * _fact(j1 + j2 - J)
    pre /= _fact(j1 + j2 + J + 1)
    pre *= (_fact(J + M) * _fact(J - M) * _fact(j1 - m1) * _fact(j1 + m1)
            * _fact(j2 - m2) * _fact(j2 + m2))
    total = 0.0
    for k in range(0, int(j1 + j2 - J) + 1):
        args = (j1 + j2 - J - k, j1 - m1 - k, j2 + m2 - k, J - j2 + m1 + k, J - j1 - m2 + k)
        if any(a < 0 for a in args):
            continue
        den = _fact(Fraction(k))
        for a in args:
            den *= _fact(a)
        total += (-1) ** k / den
    return math.sqrt(pre) * total


# Squared CG weights for the two 854/850 nm lines, (m_lower, m_upper) -> weight,
# written out by hand.  Used to cross-check the Racah evaluation at import.
_CHECK_TABLE = {
    ("P3/2", "D5/2"): {
        (Fraction(-5, 2), Fraction(-3, 2)): 2 / 3,
        (Fraction(-3, 2), Fraction(-3, 2)): 4 / 15,
        (Fraction(-1, 2), Fraction(-3, 2)): 1 / 15,
        (Fraction(-3, 2), Fraction(-1, 2)): 2 / 5,
        (Fraction(-1, 2), Fraction(-1, 2)): 2 / 5,
        (Fraction(1, 2), Fraction(-1, 2)): 1 / 5,
    },
    ("P3/2", "D3/2"): {
        (Fraction(-3, 2), Fraction(-3, 2)): 3 / 5,
        (Fraction(-1, 2), Fraction(-3, 2)): 2 / 5,
        (Fraction(-3, 2), Fraction(-1, 2)): 2 / 5,
        (Fraction(-1, 2), Fraction(-1, 2)): 1 / 15,
        (Fraction(1, 2), Fraction(-1, 2)): 8 / 15,
    },
}


@dataclass(frozen=True)
class Transition:
    upper: str
    lower: str
    wavelength_nm: float
    branching: float
    relative_strength: float | None = None
    # (m_lower, m_upper, q) -> squared CG weight, normalized per upper sublevel
    couplings: Mapping[tuple[Fraction, Fraction, int], float] = field(default_factory=dict, repr=False)


def _couplings(J_upper: Fraction, J_lower: Fraction) -> dict[tuple[Fraction, Fraction, int], float]:
    out = {}
    for k_u in range(int(2 * J_upper + 1)):
        mu = -J_upper + k_u
        for k_l in range(int(2 * J_lower + 1)):
            ml = -J_lower + k_l
            q = mu - ml
            if abs(q) > 1:
                continue
            w = clebsch_gordan(J_lower, ml, 1, q, J_upper, mu) ** 2
            if w > 0:
                out[(ml, mu, int(q))] = w
    return out


DEFAULT_BRANCHING = {
    ("P1/2", "S1/2"): 0.936,
    ("P1/2", "D3/2"): 0.064,
    ("P3/2", "S1/2"): 0.9344,
    ("P3/2", "D5/2"): 0.0590,
    ("P3/2", "D3/2"): 0.0066,
}

WAVELENGTHS_NM = {
    ("P1/2", "S1/2"): 396.8,
    ("P1/2", "D3/2"): 866.2,
    ("P3/2", "S1/2"): 393.4,
    ("P3/2", "D5/2"): 854.2,
    ("P3/2", "D3/2"): 849.8,
}


class TransitionTable:
    """Dipole decay channels between fine-structure levels.

    ``branching`` overrides individual branching ratios; values out of each
    upper level must still sum to one.  ``strength_ratio`` is the oscillator
    strength of the 854 nm line relative to the 850 nm line.
    """

    def __init__(self, branching: Mapping[tuple[str, str], float] | None = None,
                 strength_ratio: float = 6.0, levels: Mapping[str, Level] | None = None):
        self.levels = dict(levels or default_levels())
        br = dict(DEFAULT_BRANCHING)
        if branching:
            br.update(branching)
        for upper in {u for u, _ in br}:
            total = sum(v for (u, _), v in br.items() if u == upper)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"branching ratios out of {upper} sum to {total}")
        strengths = {("P3/2", "D5/2"): strength_ratio, ("P3/2", "D3/2"): 1.0}
        self.entries: dict[tuple[str, str], Transition] = {}
        for key, b in br.items():
            u, l = key
            self.entries[key] = Transition(
                u, l, WAVELENGTHS_NM[key], b, strengths.get(key),
                _couplings(self.levels[u].J, self.levels[l].J))

    def __getitem__(self, key: tuple[str, str]) -> Transition:
        try:
            return self.entries[key]
        except KeyError:
            raise KeyError(f"no tabulated line {key[0]} <-> {key[1]}") from None

    def branching(self, upper: str, lower: str) -> float:
        return self[(upper, lower)].branching

    @property
    def strength_ratio(self) -> float:
        return self[("P3/2", "D5/2")].relative_strength / self[("P3/2", "D3/2")].relative_strength

    def report(self) -> str:
        """Human-readable constants table."""
        lines = ["level   J    gJ       lifetime/s"]
        for term in TERMS:
            lv = self.levels[term]
            life = "inf" if math.isinf(lv.lifetime) else f"{lv.lifetime:.4g}"
            lines.append(f"{term:<7} {str(lv.J):<4} {lv.gJ:<8.5f} {life}")
        lines.append("")
        lines.append("upper  lower  lambda/nm  branching  rel.strength")
        for (u, l), tr in sorted(self.entries.items()):
            s = "-" if tr.relative_strength is None else f"{tr.relative_strength:g}"
            lines.append(f"{u:<6} {l:<6} {tr.wavelength_nm:<10.1f} {tr.branching:<10.4f} {s}")
        lines.append("")
        lines.append(f"mu_B/h = {MU_B_MHZ_PER_GAUSS} MHz/G")
        return "\n".join(lines) + "\n"


@lru_cache(maxsize=None)
def default_table() -> TransitionTable:
    return TransitionTable()


def _verify_couplings(table: TransitionTable) -> None:
    for key, expected in _CHECK_TABLE.items():
        got = table[key].couplings
        for (ml, mu), w in expected.items():
            for sgn in (1, -1):
                q = int(sgn * (mu - ml))
                if abs(got[(sgn * ml, sgn * mu, q)] - w) > 1e-12:
                    raise RuntimeError(f"coupling table mismatch on {key} at {(ml, mu)}")


_verify_couplings(default_table())


def transition_coupling(lower: Sublevel, upper: Sublevel, q: int,
                        table: TransitionTable | None = None) -> float:
    """Squared CG weight of the dipole component ``q`` linking two sublevels.

    Normalized so that the weights out of one upper sublevel into all lower
    sublevels of a line sum to one.
    """
    table = table or default_table()
    tr = table[(upper.level.term, lower.level.term)]
    if q not in (-1, 0, 1) or q != upper.m - lower.m:
        return 0.0
    return tr.couplings.get((lower.m, upper.m, q), 0.0)


def absorption_lineshape(detuning, atom_fwhm: float, photon_fwhm: float):
    """Peak-normalized Lorentzian with the two widths added.

    The convolution of two Lorentzians is a Lorentzian whose FWHM is the sum
    of the two.
    """
    if atom_fwhm <= 0 or photon_fwhm <= 0:
        raise ValueError("linewidths must be positive")
    gamma = atom_fwhm + photon_fwhm
    x = 2.0 * np.asarray(detuning, dtype=float) / gamma
    out = 1.0 / (1.0 + x * x)
    return float(out) if np.ndim(out) == 0 else out


def lorentzian(detuning, fwhm: float):
    """Peak-normalized Lorentzian ``1 / (1 + (2 d / fwhm)^2)``."""
    if fwhm <= 0:
        raise ValueError("fwhm must be positive")
    x = 2.0 * np.asarray(detuning, dtype=float) / fwhm
    out = 1.0 / (1.0 + x * x)
    return float(out) if np.ndim(out) == 0 else out


def relative_scheme_efficiency(table: TransitionTable | None = None) -> float:
    """Efficiency of 854 nm quantum-jump detection relative to 850 nm.

    The stronger 854 nm line absorbs more, and the P3/2 decay that ends the
    dark period (to S1/2) is far likelier than the one that starts it on the
    850 nm scheme (to D5/2).
    """
    table = table or default_table()
    return table.strength_ratio * table.branching("P3/2", "S1/2") / table.branching("P3/2", "D5/2")


def sigma_line_offsets(sign: int, B: MagneticField, table: TransitionTable | None = None,
                       populations: Mapping[Fraction, float] | None = None) -> list[tuple[float, float]]:
    """Absorption lines of a D5/2 ion pumped to its outer sublevels.

    ``sign = +1`` means the two upper sublevels (m = 5/2, 3/2), which only
    absorb sigma-minus light on the 854 nm line; ``sign = -1`` the two lower
    ones (sigma-plus).  Returns ``(shift_MHz, weight)`` pairs, weights summing
    to one and proportional to population times line strength.
    """
    table = table or default_table()
    levels = table.levels
    if populations is None:
        populations = {Fraction(5, 2): 0.5, Fraction(3, 2): 0.5}
    q = -sign
    lines = []
    for m_abs, pop in populations.items():
        ml = sign * Fraction(m_abs)
        mu = ml + q
        if abs(mu) > levels["P3/2"].J:
            continue
        lo = Sublevel(levels["D5/2"], ml)
        up = Sublevel(levels["P3/2"], mu)
        w = pop * transition_coupling(lo, up, q, table)
        lines.append((zeeman_shift(up, B) - zeeman_shift(lo, B), w))
    total = sum(w for _, w in lines)
    return [(s, w / total) for s, w in lines]
