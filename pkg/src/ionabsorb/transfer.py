"""Heralded photon-to-qubit state transfer on the S1/2 Zeeman qubit.

The ion is pumped to S1/2 m=-1/2, an RF pulse (y rotation) makes the
superposition, and two 729 nm pulses move it to D5/2 m=-3/2 and m=+3/2.
A photon with sigma+ / sigma- amplitudes (a+, a-) is absorbed from m=-3/2 /
m=+3/2 respectively into P3/2 m=-1/2 / m=+1/2, which decay to S1/2 by a pi
polarized 393 nm photon.  Detecting that photon heralds the qubit
``a+ |-1/2> + a- |+1/2>``, up to a Zeeman phase set by the detection time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .atomic import TransitionTable, clebsch_gordan, default_table
from .polarization import PolarizationState
from .sequence import PulseSequence
from .sim import jitter_sigma, detector_jitter


class MalformedSequenceError(ValueError):
    pass


@dataclass(frozen=True)
class DState:
    """Amplitudes left after preparation.

    ``d`` holds D5/2 m=-3/2, +3/2; ``s`` the residual S1/2 m=-1/2, +1/2.
    """

    d: np.ndarray
    s: np.ndarray

    @property
    def relative_phase(self) -> float:
        return float(np.angle(self.d[0] * np.conj(self.d[1])))

    def fidelity(self, phase: float = 0.0) -> float:
        ideal = np.array([np.exp(1j * phase), 1.0]) / np.sqrt(2)
        return float(abs(np.vdot(ideal, self.d)) ** 2)


@dataclass
class IonQubitState:
    """S1/2 qubit: amplitudes on (m=-1/2, m=+1/2), plus accumulated Zeeman phase."""

    amplitudes: np.ndarray
    phase_reference: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        n = np.linalg.norm(a)
        if n == 0:
            raise ValueError("zero qubit state")
        self.amplitudes = a / n

    def fidelity(self, target) -> float:
        t = target.amplitudes if isinstance(target, IonQubitState) else np.asarray(target, complex)
        return float(abs(np.vdot(t / np.linalg.norm(t), self.amplitudes)) ** 2)


@dataclass
class TransferOutcome:
    heralded: bool
    herald_time: float | None = None
    state: IonQubitState | None = None
    fidelity: float | None = None


def _ry(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def prepare_transfer_state(sequence: PulseSequence) -> DState:
    """Run the preparation pulses of ``sequence`` with ideal unitaries."""
    pulses = list(sequence.pulses)
    pumps = [p for p in pulses if "397" in p.lasers and p.polarization == "sigma-"]
    rf = [p for p in pulses if "rf" in p.lasers]
    carriers = {p.target: p for p in pulses if "729" in p.lasers}
    if not pumps:
        raise MalformedSequenceError("missing sigma- polarized 397 nm pumping")
    if len(rf) != 1 or rf[0].area is None:
        raise MalformedSequenceError("need exactly one RF pulse with a pulse area")
    if set(carriers) != {(-1, -3), (1, 3)} or any(p.area is None for p in carriers.values()):
        raise MalformedSequenceError("need 729 nm pulses on S(-1/2)<->D(-3/2) and S(+1/2)<->D(+3/2)")
    order = [pulses.index(p) for p in (pumps[0], rf[0])] + sorted(pulses.index(p) for p in carriers.values())
    if order != sorted(order):
        raise MalformedSequenceError("pulses out of order: pump, RF, then 729 nm")

    s = _ry(rf[0].area) @ np.array([1.0, 0.0], dtype=complex)
    d = np.zeros(2, dtype=complex)
    for k, target in enumerate([(-1, -3), (1, 3)]):
        th = carriers[target].area
        d[k] = -1j * np.sin(th / 2) * s[k]
        s[k] = np.cos(th / 2) * s[k]
    # drop the common -i so ideal pulses give real, equal amplitudes
    return DState(d * 1j, s)


def haar_qubits(rng: np.random.Generator, n: int) -> np.ndarray:
    z = rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _path_weights(table: TransitionTable) -> np.ndarray:
    """Absorption x pi-emission CG products for the two paths (-3/2 and +3/2)."""
    J = table.levels
    out = []
    for md, mp in ((-1.5, -0.5), (1.5, 0.5)):
        q = int(round(mp - md))
        absorb = clebsch_gordan(J["D5/2"].J, md, 1, q, J["P3/2"].J, mp)
        emit = clebsch_gordan(J["S1/2"].J, mp, 1, 0, J["P3/2"].J, mp)
        out.append(absorb * emit)
    return np.array(out)


@dataclass
class TransferConfig:
    pulse_area_error: float = 0.0
    jitter_fwhm: float = 0.0  # s
    zeeman_splitting: float = 10.0  # MHz, qubit splitting
    detection_efficiency_393: float = 1.0
    absorption_probability: float = 1.0
    exposure: float = 1e-3  # s
    phase_tracking: bool = True

    def sequence(self) -> PulseSequence:
        return PulseSequence.state_transfer(exposure=self.exposure, area_error=self.pulse_area_error)


def _transfer_batch(prep: DState, photons: np.ndarray, cfg: TransferConfig,
                    rng: np.random.Generator, table: TransitionTable):
    """Vectorized core.  ``photons`` is (n, 2) of (sigma+, sigma-) amplitudes.

    Returns heralded mask, recorded herald times, output qubit amplitudes
    (n, 2) and fidelities against ``a+|-1/2> + a-|+1/2>``.
    """
    n = photons.shape[0]
    w = _path_weights(table)
    raw = photons * (prep.d * w)[None, :]
    # static phases of the ideal map are calibrated out once
    ideal = _path_weights(table) * np.array([1, 1]) / np.sqrt(2)
    raw = raw * np.exp(-1j * np.angle(ideal))[None, :]
    norm2 = np.sum(np.abs(raw) ** 2, axis=1)
    ref = np.sum(np.abs(ideal) ** 2) / 2
    p_abs = np.clip(cfg.absorption_probability * norm2 / ref, 0, 1)
    p_herald = p_abs * table.branching("P3/2", "S1/2") * cfg.detection_efficiency_393
    heralded = rng.random(n) < p_herald

    t_true = rng.uniform(0.0, cfg.exposure, n)
    t_rec = t_true + detector_jitter(cfg.jitter_fwhm, n, rng)
    omega = 2 * np.pi * cfg.zeeman_splitting * 1e6
    out = raw / np.sqrt(np.where(norm2 > 0, norm2, 1))[:, None]
    out[:, 1] *= np.exp(1j * omega * t_true)
    if cfg.phase_tracking:
        out[:, 1] *= np.exp(-1j * omega * t_rec)
    fid = np.abs(np.sum(np.conj(photons) * out, axis=1)) ** 2
    return heralded, t_rec, out, fid


def absorb_and_herald(prepared: DState, photon: PolarizationState, rng: np.random.Generator,
                      cfg: TransferConfig | None = None, table: TransitionTable | None = None,
                      axis=(0.0, 0.0, 1.0)) -> TransferOutcome:
    """Expose the prepared ion to one photon and report the heralded qubit."""
    cfg = cfg or TransferConfig()
    table = table or default_table()
    amps = np.array([photon.sigma_components(axis)], dtype=complex)
    her, t, out, fid = _transfer_batch(prepared, amps, cfg, rng, table)
    if not her[0]:
        return TransferOutcome(False)
    return TransferOutcome(True, float(t[0]), IonQubitState(out[0]), float(fid[0]))


def jitter_dephasing_factor(zeeman_splitting: float, jitter_fwhm: float) -> float:
    """Coherence left after Gaussian herald-time jitter, exp(-(w sigma)^2 / 2)."""
    return float(np.exp(-0.5 * (2 * np.pi * zeeman_splitting * 1e6 * jitter_sigma(jitter_fwhm)) ** 2))


@dataclass
class TransferReport:
    mean_fidelity: float
    fidelity_error: float
    success_probability: float
    n_attempts: int
    n_heralded: int
    fidelities: np.ndarray

    def as_dict(self) -> dict:
        return {"mean_fidelity": self.mean_fidelity, "fidelity_error": self.fidelity_error,
                "success_probability": self.success_probability,
                "n_attempts": self.n_attempts, "n_heralded": self.n_heralded}


def transfer_fidelity_experiment(cfg: TransferConfig, n_inputs: int, rng: np.random.Generator,
                                 table: TransitionTable | None = None) -> TransferReport:
    """Prepare, expose and herald ``n_inputs`` times with Haar-random photons.

    Fidelity is averaged over heralded attempts only.
    """
    if n_inputs < 1:
        raise ValueError("n_inputs must be >= 1")
    table = table or default_table()
    prep = prepare_transfer_state(cfg.sequence())
    photons = haar_qubits(rng, n_inputs)
    her, _, _, fid = _transfer_batch(prep, photons, cfg, rng, table)
    f = fid[her]
    mean = float(f.mean()) if f.size else float("nan")
    err = float(f.std(ddof=1) / np.sqrt(f.size)) if f.size > 1 else float("nan")
    return TransferReport(mean, err, float(her.mean()), n_inputs, int(her.sum()), f)
