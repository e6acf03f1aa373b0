"""SPDC pair source with narrowband herald filtering.

Pairs are emitted as a homogeneous Poisson process.  The idler (herald)
detuning is drawn from a broad Lorentzian truncated at five FWHM on either
side; energy conservation fixes the signal detuning.  Two-photon
polarization states are 4x4 density matrices ordered herald (x) signal in the
basis HH, HV, VH, VV.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .atomic import lorentzian
from .polarization import Analyzer, PolarizationState

TRUNCATION_FWHM = 5.0

_BELL = {
    "psi+": np.array([0, 1, 1, 0]) / np.sqrt(2),
    "psi-": np.array([0, 1, -1, 0]) / np.sqrt(2),
    "phi+": np.array([1, 0, 0, 1]) / np.sqrt(2),
    "phi-": np.array([1, 0, 0, -1]) / np.sqrt(2),
}


class PairPolarizationState:
    """Two-photon polarization density matrix, herald first."""

    def __init__(self, rho):
        rho = np.array(rho, dtype=complex)
        if rho.shape != (4, 4):
            raise ValueError("pair state must be 4x4")
        if np.max(np.abs(rho - rho.conj().T)) > 1e-12:
            raise ValueError("pair state is not Hermitian")
        if abs(np.trace(rho) - 1) > 1e-12:
            raise ValueError("pair state trace must be 1")
        if np.min(np.linalg.eigvalsh(rho)) < -1e-12:
            raise ValueError("pair state is not positive semidefinite")
        self.rho = rho

    @classmethod
    def bell(cls, name: str = "psi+") -> "PairPolarizationState":
        v = _BELL[name].astype(complex)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def werner(cls, p: float, name: str = "psi+") -> "PairPolarizationState":
        if not 0 <= p <= 1:
            raise ValueError("Werner parameter must lie in [0, 1]")
        return cls(p * cls.bell(name).rho + (1 - p) * np.eye(4) / 4)

    @classmethod
    def product(cls, herald: PolarizationState, signal: PolarizationState) -> "PairPolarizationState":
        v = np.kron(herald.vector, signal.vector)
        return cls(np.outer(v, v.conj()))

    def expectation(self, herald_op=None, signal_op=None) -> float:
        a = np.eye(2) if herald_op is None else herald_op
        b = np.eye(2) if signal_op is None else signal_op
        return float(np.trace(np.kron(a, b) @ self.rho).real)

    def signal_marginal(self) -> np.ndarray:
        return np.einsum("ijik->jk", self.rho.reshape(2, 2, 2, 2))

    def __repr__(self):
        return f"PairPolarizationState(purity={np.trace(self.rho @ self.rho).real:.4f})"


@dataclass(frozen=True)
class Projection:
    probability: float
    density: np.ndarray

    @property
    def purity(self) -> float:
        return float(np.trace(self.density @ self.density).real)

    @property
    def state(self) -> PolarizationState:
        if self.purity < 1 - 1e-9:
            raise ValueError(f"partner state is mixed (purity {self.purity:.6f})")
        w, v = np.linalg.eigh(self.density)
        return PolarizationState.from_vector(v[:, np.argmax(w)])


def project_pair(state: PairPolarizationState, herald: Analyzer | PolarizationState | None) -> Projection:
    """Born probability of the herald passing its analyzer, and the signal state it leaves."""
    if herald is None:
        proj = np.eye(2)
    elif isinstance(herald, Analyzer):
        proj = herald.projector()
    else:
        proj = herald.projector()
    m = np.kron(proj, np.eye(2)) @ state.rho @ np.kron(proj, np.eye(2))
    partner = np.einsum("ijik->jk", m.reshape(2, 2, 2, 2))
    p = float(np.trace(partner).real)
    if p <= 1e-15:
        raise ValueError("herald setting has zero probability for this pair state")
    return Projection(p, partner / p)


def filter_transmission(detuning, fwhm: float):
    """Lorentzian transmission of the herald filter cavities."""
    return lorentzian(detuning, fwhm)


@dataclass
class SourceConfig:
    pair_rate: float = 0.0
    raw_bandwidth_fwhm: float = 200.0  # GHz
    filter_fwhm: float = 22.0  # MHz
    filter_detuning: float = 0.0  # MHz
    pump_offset: float = 0.0  # MHz
    herald_efficiency: float = 1.0
    splitter: str = "PBS"
    # PBS: signal leaves in ``signal_polarization`` and the herald is V.
    # NPBS: the pair carries ``pair_state``.
    signal_polarization: PolarizationState = field(default_factory=lambda: PolarizationState.from_label("H"))
    pair_state: PairPolarizationState = field(default_factory=PairPolarizationState.bell)
    herald_analyzer: Analyzer | None = None

    def __post_init__(self):
        if self.pair_rate < 0:
            raise ValueError("pair_rate must be >= 0")
        if self.raw_bandwidth_fwhm <= 0 or self.filter_fwhm <= 0:
            raise ValueError("bandwidths must be positive")
        if not 0 <= self.herald_efficiency <= 1:
            raise ValueError("herald_efficiency must lie in [0, 1]")
        if self.splitter not in ("PBS", "NPBS"):
            raise ValueError("splitter must be PBS or NPBS")

    @property
    def raw_fwhm_mhz(self) -> float:
        return self.raw_bandwidth_fwhm * 1e3

    def effective_pair_state(self) -> PairPolarizationState:
        if self.splitter == "PBS":
            return PairPolarizationState.product(PolarizationState.from_label("V"), self.signal_polarization)
        return self.pair_state

    def herald_projector(self) -> np.ndarray:
        return np.eye(2) if self.herald_analyzer is None else self.herald_analyzer.projector()

    def signal_detuning(self, idler_detuning):
        return -np.asarray(idler_detuning) - 2.0 * self.pump_offset


@dataclass
class PairEvent:
    time: float
    signal_detuning: float
    idler_detuning: float
    herald_detected: bool
    conditional_signal_density: np.ndarray | None = None

    @property
    def conditional_signal_polarization(self) -> PolarizationState | None:
        if self.conditional_signal_density is None:
            return None
        return Projection(1.0, self.conditional_signal_density).state


def _raw_peak_density(raw_fwhm: float) -> float:
    mass = 2.0 / np.pi * np.arctan(2 * TRUNCATION_FWHM)
    return 2.0 / (np.pi * raw_fwhm) / mass


def raw_density(detuning, raw_fwhm: float):
    """Truncated, normalized Lorentzian density of the idler detuning (per MHz)."""
    x = np.asarray(detuning, dtype=float)
    out = _raw_peak_density(raw_fwhm) * lorentzian(x, raw_fwhm)
    return np.where(np.abs(x) <= TRUNCATION_FWHM * raw_fwhm, out, 0.0)


def sample_raw_detuning(rng: np.random.Generator, n: int, raw_fwhm: float) -> np.ndarray:
    """Inverse-CDF draw from the truncated Lorentzian."""
    u = rng.uniform(-1.0, 1.0, n)
    return 0.5 * raw_fwhm * np.tan(u * np.arctan(2 * TRUNCATION_FWHM))


@lru_cache(maxsize=256)
def raw_overlap(raw_fwhm: float, fwhm: float, center: float) -> float:
    """Integral of the raw density against a peak-normalized Lorentzian at ``center``."""
    half = 0.5 * (raw_fwhm + fwhm)
    full = 0.5 * np.pi * fwhm * half / np.pi / (center ** 2 + half ** 2)
    X = TRUNCATION_FWHM * raw_fwhm
    f = lambda x: (2.0 / (np.pi * raw_fwhm)) * lorentzian(x, raw_fwhm) * lorentzian(x - center, fwhm)
    tails = integrate.quad(f, X, np.inf)[0] + integrate.quad(f, -np.inf, -X)[0]
    mass = 2.0 / np.pi * np.arctan(2 * TRUNCATION_FWHM)
    return (full - tails) / mass


def herald_fraction(cfg: SourceConfig) -> float:
    """Mean probability that a pair produces a herald detection."""
    state = cfg.effective_pair_state()
    p_pol = state.expectation(cfg.herald_projector(), None)
    return cfg.herald_efficiency * p_pol * raw_overlap(cfg.raw_fwhm_mhz, cfg.filter_fwhm, cfg.filter_detuning)


def generate_pairs(cfg: SourceConfig, duration: float, rng: np.random.Generator) -> list[PairEvent]:
    """Every pair emitted in ``[0, duration)``, time ordered.

    Meant for inspection and small durations; the simulator draws only the
    pairs that matter through :func:`interaction_events`.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    n = rng.poisson(cfg.pair_rate * duration)
    if n == 0:
        return []
    times = np.sort(rng.uniform(0.0, duration, n))
    idler = sample_raw_detuning(rng, n, cfg.raw_fwhm_mhz)
    signal = cfg.signal_detuning(idler)
    state = cfg.effective_pair_state()
    try:
        proj = project_pair(state, cfg.herald_analyzer)
        p_pol, cond = proj.probability, proj.density
    except ValueError:
        p_pol, cond = 0.0, None
    p_herald = cfg.herald_efficiency * filter_transmission(idler - cfg.filter_detuning, cfg.filter_fwhm) * p_pol
    heralded = rng.random(n) < p_herald
    return [PairEvent(float(t), float(s), float(i), bool(h), cond if h else None)
            for t, s, i, h in zip(times, signal, idler, heralded)]


def write_pairs_csv(events: list[PairEvent], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "signal_detuning_mhz", "idler_detuning_mhz", "herald_detected"])
        for e in events:
            w.writerow([f"{e.time:.12g}", f"{e.signal_detuning:.9g}", f"{e.idler_detuning:.9g}", int(e.herald_detected)])


@dataclass(frozen=True)
class Absorber:
    """What the ion absorbs: accepted polarization and absorption lines.

    ``accepted = None`` means polarization-insensitive.  ``lines`` holds
    ``(shift_MHz, weight)`` pairs relative to the bare line centre with
    weights summing to one.
    """

    accepted: PolarizationState | None = None
    lines: tuple[tuple[float, float], ...] = ((0.0, 1.0),)
    atom_fwhm: float = 22.0

    def projector(self) -> np.ndarray:
        return np.eye(2) if self.accepted is None else self.accepted.projector()

    def profile(self, signal_detuning):
        x = np.asarray(signal_detuning, dtype=float)
        return sum(w * lorentzian(x - s, self.atom_fwhm) for s, w in self.lines)


@dataclass
class InteractionEvents:
    """Pairs that produce a herald detection or would be absorbed by the ion."""

    time: np.ndarray
    signal_detuning: np.ndarray
    herald: np.ndarray
    absorb: np.ndarray

    def __len__(self):
        return len(self.time)


def absorption_per_pair(cfg: SourceConfig, peak_rate: float, atom_fwhm: float = 22.0) -> float:
    """Per-pair absorption probability at line centre and matched polarization.

    Calibrated so that a locked source (pump offset 0) with matched
    polarization produces ``peak_rate`` absorptions per second.
    """
    if peak_rate == 0:
        return 0.0
    if cfg.pair_rate <= 0:
        raise ValueError("a nonzero absorption rate needs a nonzero pair rate")
    c = peak_rate / (cfg.pair_rate * raw_overlap(cfg.raw_fwhm_mhz, atom_fwhm, 0.0))
    if c > 1:
        raise ValueError(f"absorption rate {peak_rate} /s is unreachable at pair rate {cfg.pair_rate} /s")
    return c


def interaction_events(cfg: SourceConfig, absorber: Absorber, peak_rate: float,
                       duration: float, rng: np.random.Generator) -> InteractionEvents:
    """Sample only the pairs with a herald detection or an absorption.

    Exact Poisson thinning: candidate pairs are drawn from a dominating
    intensity (herald filter Lorentzian plus absorption Lorentzians, each
    times the raw spectral density) and each candidate is assigned an
    outcome with probability outcome / envelope.  The ``absorb`` flag says
    the photon would be absorbed if the ion is in an absorbing state.
    """
    empty = InteractionEvents(np.empty(0), np.empty(0), np.empty(0, bool), np.empty(0, bool))
    if duration <= 0 or cfg.pair_rate == 0:
        return empty
    raw = cfg.raw_fwhm_mhz
    rho_max = _raw_peak_density(raw)
    c = absorption_per_pair(cfg, peak_rate, absorber.atom_fwhm)

    idlers = []
    # herald component
    lam = cfg.pair_rate * cfg.herald_efficiency * 0.5 * np.pi * cfg.filter_fwhm * rho_max * duration
    n = rng.poisson(lam)
    idlers.append(cfg.filter_detuning + 0.5 * cfg.filter_fwhm * np.tan(np.pi * (rng.random(n) - 0.5)))
    # absorption components, one per line
    if c > 0:
        for shift, w in absorber.lines:
            lam = cfg.pair_rate * c * w * 0.5 * np.pi * absorber.atom_fwhm * rho_max * duration
            n = rng.poisson(lam)
            sig = shift + 0.5 * absorber.atom_fwhm * np.tan(np.pi * (rng.random(n) - 0.5))
            idlers.append(-sig - 2.0 * cfg.pump_offset)
    idler = np.concatenate(idlers)
    keep = rng.random(len(idler)) * rho_max < raw_density(idler, raw)
    idler = idler[keep]
    n = len(idler)
    times = rng.uniform(0.0, duration, n)

    sig = cfg.signal_detuning(idler)
    h0 = cfg.herald_efficiency * filter_transmission(idler - cfg.filter_detuning, cfg.filter_fwhm)
    a0 = c * absorber.profile(sig) if c > 0 else np.zeros(n)
    state = cfg.effective_pair_state()
    Pi, A = cfg.herald_projector(), absorber.projector()
    pH = h0 * state.expectation(Pi, None)
    pA = a0 * state.expectation(None, A)
    pHA = h0 * a0 * state.expectation(Pi, A)
    u = rng.random(n) * (h0 + a0)
    herald = u < pH
    absorb = (u < pHA) | ((u >= pH) & (u < pH + pA - pHA))

    sel = herald | absorb
    order = np.argsort(times[sel], kind="stable")
    return InteractionEvents(times[sel][order], sig[sel][order], herald[sel][order], absorb[sel][order])
