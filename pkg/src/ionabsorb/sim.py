"""Event-driven Monte Carlo of a single ion exposed to SPDC photons.

Four detection schemes are supported:

* ``A``: 850 nm photons, absorption followed by decay to D5/2 ends the
  fluorescence (bright -> dark); D5/2 decay restores it.
* ``B``: 854 nm photons with a weak 850 nm pump; the pump empties the bright
  state and an absorption (or D5/2 decay) restarts the fluorescence.
* ``C`` / ``D``: the ion is prepared in D3/2 / D5/2 by a pulse sequence and
  an absorption shows up as a single 393 nm photon.

Random numbers come from Philox generators keyed by
``SeedSequence(master_seed, spawn_key=(trajectory, component))``, so each
component of each trajectory owns an independent, reproducible stream.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .atomic import TransitionTable, default_table
from .sequence import PulseSequence
from .source import Absorber, SourceConfig, interaction_events
from .timetags import EMISSION_393, FLUORESCENCE, HERALD, MARKER, TimeTagStream

SCHEMES = ("A", "B", "C", "D")

_PAIRS, _STATE, _FLUOR, _DARK, _JITTER, _EMIT = range(6)


def stream_rng(master_seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(master_seed) & (2 ** 64 - 1), spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class TrajectoryConfig:
    scheme: str = "B"
    duration: float = 60.0
    r_on: float = 5e4
    r_dark: float = 500.0
    pump_rate_850: float = 1.0
    tau0: float = 1.11
    source: SourceConfig = field(default_factory=SourceConfig)
    absorption_peak_rate: float = 0.0
    detection_efficiency_393: float = 0.1
    absorber: Absorber = field(default_factory=Absorber)
    sequence: PulseSequence | None = None
    jitter_fwhm: float = 1e-9
    resolution_ps: int = 1000
    master_seed: int = 0
    trajectory: int = 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        for name in ("r_on", "r_dark", "pump_rate_850", "absorption_peak_rate", "jitter_fwhm"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.duration < 0:
            raise ValueError("duration must be >= 0")
        if self.tau0 <= 0:
            raise ValueError("tau0 must be positive")
        if not 0 <= self.detection_efficiency_393 <= 1:
            raise ValueError("detection_efficiency_393 must lie in [0, 1]")
        if self.scheme == "A" and self.sequence is not None:
            raise ValueError("scheme A runs continuously; drop the pulse sequence")
        if self.scheme in ("C", "D") and self.sequence is None:
            self.sequence = PulseSequence.state_transfer()
        if self.sequence is not None:
            self.sequence.detection_window()

    def rng(self, component: int) -> np.random.Generator:
        return stream_rng(self.master_seed, self.trajectory, component)


@dataclass
class GroundTruthLog:
    time: list[float] = field(default_factory=list)
    before: list[str] = field(default_factory=list)
    after: list[str] = field(default_factory=list)
    cause: list[str] = field(default_factory=list)
    heralded: list[bool] = field(default_factory=list)

    def add(self, t, before, after, cause, heralded=False):
        self.time.append(float(t))
        self.before.append(before)
        self.after.append(after)
        self.cause.append(cause)
        self.heralded.append(bool(heralded))

    def __len__(self):
        return len(self.time)

    def sorted(self) -> "GroundTruthLog":
        order = sorted(range(len(self)), key=lambda i: self.time[i])
        out = GroundTruthLog()
        for i in order:
            out.add(self.time[i], self.before[i], self.after[i], self.cause[i], self.heralded[i])
        return out

    def jumps(self, before: str, after: str, cause: str | None = None) -> np.ndarray:
        return np.array([t for t, b, a, c in zip(self.time, self.before, self.after, self.cause)
                         if b == before and a == after and (cause is None or c == cause)])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "from", "to", "cause", "heralded"])
            for row in zip(self.time, self.before, self.after, self.cause, self.heralded):
                w.writerow([f"{row[0]:.12f}", row[1], row[2], row[3], int(row[4])])


def jitter_sigma(fwhm: float) -> float:
    return fwhm / (2.0 * np.sqrt(2.0 * np.log(2.0)))


def detector_jitter(fwhm: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Gaussian timing jitter truncated at five standard deviations."""
    if fwhm < 0:
        raise ValueError("jitter fwhm must be >= 0")
    if fwhm == 0:
        return np.zeros(size)
    sigma = jitter_sigma(fwhm)
    out = rng.normal(0.0, sigma, size)
    bad = np.abs(out) > 5 * sigma
    while bad.any():
        out[bad] = rng.normal(0.0, sigma, int(bad.sum()))
        bad = np.abs(out) > 5 * sigma
    return out


def _poisson_times(rng, starts, ends, rate):
    """Homogeneous Poisson detections inside each [start, end) interval."""
    starts = np.asarray(starts, float)
    lengths = np.asarray(ends, float) - starts
    if rate == 0 or len(starts) == 0:
        return np.empty(0)
    counts = rng.poisson(rate * lengths)
    base = np.repeat(starts, counts)
    span = np.repeat(lengths, counts)
    return base + rng.random(base.size) * span


def _windows(cfg: TrajectoryConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    seq = cfg.sequence
    off, length = seq.detection_window()
    n = int(np.floor(cfg.duration / seq.duration + 1e-12))
    cycle = np.arange(n) * seq.duration
    return cycle, cycle + off, cycle + off + length


def _continuous(cfg, table, ev, rng, log):
    """Schemes A and B with lasers on all the time; returns bright intervals."""
    T = cfg.duration
    absorbing = ev.absorb
    t_abs, h_abs = ev.time[absorbing], ev.herald[absorbing]
    b_d52 = table.branching("P3/2", "D5/2")
    # keep only absorptions whose decay changes the fluorescence state
    p_jump = b_d52 if cfg.scheme == "A" else 1.0 - b_d52
    keep = rng.random(t_abs.size) < p_jump
    t_abs, h_abs = t_abs[keep], h_abs[keep]

    starts, ends = [], []
    t, bright = 0.0, True
    while t < T:
        if bright:
            if cfg.scheme == "B":
                t_next = t + rng.exponential(1.0 / cfg.pump_rate_850) if cfg.pump_rate_850 > 0 else np.inf
                cause, her = "pump", False
            else:
                i = np.searchsorted(t_abs, t, side="right")
                t_next = t_abs[i] if i < t_abs.size else np.inf
                cause, her = "spdc_absorption", bool(h_abs[i]) if i < t_abs.size else False
            starts.append(t)
            ends.append(min(t_next, T))
            if t_next >= T:
                break
            log.add(t_next, "bright", "dark", cause, her)
            t, bright = t_next, False
        else:
            t_next = t + rng.exponential(cfg.tau0)
            cause, her = "spontaneous", False
            if cfg.scheme == "B":
                i = np.searchsorted(t_abs, t, side="right")
                if i < t_abs.size and t_abs[i] < t_next:
                    t_next, cause, her = t_abs[i], "spdc_absorption", bool(h_abs[i])
            if t_next >= T:
                break
            log.add(t_next, "dark", "bright", cause, her)
            t, bright = t_next, True
    return np.array(starts), np.array(ends)


def _pulsed_jumps(cfg, table, ev, rng, log):
    """Pulsed scheme B: the ion starts every detection window dark."""
    cyc, w0, w1 = _windows(cfg)
    absorbing = ev.absorb
    t_abs, h_abs = ev.time[absorbing], ev.herald[absorbing]
    keep = rng.random(t_abs.size) < 1.0 - table.branching("P3/2", "D5/2")
    t_abs, h_abs = t_abs[keep], h_abs[keep]

    i = np.searchsorted(t_abs, w0, side="left")
    valid = i < t_abs.size
    t_first = np.where(valid, t_abs[np.minimum(i, t_abs.size - 1)] if t_abs.size else np.inf, np.inf)
    her_first = np.where(valid, h_abs[np.minimum(i, t_abs.size - 1)] if t_abs.size else False, False)
    t_sp = w0 + rng.exponential(cfg.tau0, w0.size)
    onset = np.minimum(t_first, t_sp)
    by_abs = t_first < t_sp
    jumped = onset < w1

    was_dark = False
    for k in range(w0.size):
        if was_dark:
            log.add(cyc[k], "dark", "bright", "protocol_pulse")
        log.add(w0[k], "bright", "dark", "protocol_pulse")
        if jumped[k]:
            cause = "spdc_absorption" if by_abs[k] else "spontaneous"
            log.add(onset[k], "dark", "bright", cause, bool(her_first[k]) and by_abs[k])
        was_dark = not jumped[k]
    return onset[jumped], w1[jumped], w0, w1


def _pulsed_emission(cfg, table, ev, rng, log):
    """Schemes C and D: count 393 nm photons from absorptions in each window."""
    cyc, w0, w1 = _windows(cfg)
    home, lost = ("D5/2", "D3/2") if cfg.scheme == "D" else ("D3/2", "D5/2")
    b_s = table.branching("P3/2", "S1/2")
    b_home = table.branching("P3/2", home)
    t_abs, h_abs = ev.time[ev.absorb], ev.herald[ev.absorb]
    i0 = np.searchsorted(t_abs, w0, side="left")
    i1 = np.searchsorted(t_abs, w1, side="left")
    lifetime = table.levels["P3/2"].lifetime
    emitted = []
    for k in range(w0.size):
        log.add(w0[k], "S1/2", home, "protocol_pulse")
        for j in range(i0[k], i1[k]):
            u = rng.random()
            if u < b_s:
                log.add(t_abs[j], home, "S1/2", "spdc_absorption", h_abs[j])
                if rng.random() < cfg.detection_efficiency_393:
                    emitted.append(t_abs[j] + rng.exponential(lifetime))
                break
            elif u < b_s + b_home:
                log.add(t_abs[j], home, home, "spdc_absorption", h_abs[j])
            else:
                log.add(t_abs[j], home, lost, "spdc_absorption", h_abs[j])
                break
    return np.array(emitted), w0, w1


def simulate(cfg: TrajectoryConfig, table: TransitionTable | None = None) -> tuple[TimeTagStream, GroundTruthLog]:
    """Run one trajectory; returns the detected time tags and the true ion history."""
    table = table or default_table()
    log = GroundTruthLog()
    if cfg.duration == 0:
        return TimeTagStream.from_times({}, cfg.resolution_ps), log

    ev = interaction_events(cfg.source, cfg.absorber, cfg.absorption_peak_rate,
                            cfg.duration, cfg.rng(_PAIRS))
    rng = cfg.rng(_STATE)
    parts: dict[int, np.ndarray] = {}
    if cfg.sequence is None:
        b0, b1 = _continuous(cfg, table, ev, rng, log)
        parts[FLUORESCENCE] = np.concatenate([
            _poisson_times(cfg.rng(_FLUOR), b0, b1, cfg.r_on),
            _poisson_times(cfg.rng(_DARK), [0.0], [cfg.duration], cfg.r_dark)])
    elif cfg.scheme == "B":
        b0, b1, w0, w1 = _pulsed_jumps(cfg, table, ev, rng, log)
        parts[FLUORESCENCE] = np.concatenate([
            _poisson_times(cfg.rng(_FLUOR), b0, b1, cfg.r_on),
            _poisson_times(cfg.rng(_DARK), w0, w1, cfg.r_dark)])
        parts[MARKER] = w0
    else:
        emitted, w0, w1 = _pulsed_emission(cfg, table, ev, rng, log)
        parts[EMISSION_393] = emitted
        parts[MARKER] = w0
    parts[HERALD] = ev.time[ev.herald]

    jrng = cfg.rng(_JITTER)
    offset = 5 * jitter_sigma(cfg.jitter_fwhm)
    for ch in sorted(parts):
        t = parts[ch]
        noise = np.zeros(t.size) if ch == MARKER else detector_jitter(cfg.jitter_fwhm, t.size, jrng)
        parts[ch] = t + offset + noise
    return TimeTagStream.from_times(parts, cfg.resolution_ps), log


def simulate_many(cfg: TrajectoryConfig, n: int, table: TransitionTable | None = None):
    """Independent trajectories 0..n-1 of the same configuration."""
    return [simulate(replace(cfg, trajectory=k), table) for k in range(n)]
