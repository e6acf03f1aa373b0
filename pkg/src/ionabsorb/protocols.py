"""Experiment recipes: source + ion + simulator + analysis.

Continuous quantum-jump runs give dark-period fits and the herald/jump
delay histogram.  Pulsed runs (cool, pump, detect) give coincidence counts
for polarization scans, filter-detuning spectroscopy and entanglement scans.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .analysis.correlate import CorrelationHistogram, g2
from .analysis.fitting import FitResult, fit_exponential, fit_lorentzian, fit_sinusoid_fixed_period
from .analysis.jumps import (JumpAnalysis, analyze_jumps, dark_period_durations,
                             estimate_state_means)
from .atomic import MagneticField, TransitionTable, default_table, sigma_line_offsets
from .polarization import Analyzer, PolarizationState, overlap
from .sequence import PulseSequence
from .sim import TrajectoryConfig, simulate
from .source import Absorber, PairPolarizationState, SourceConfig, herald_fraction, raw_overlap
from .timetags import FLUORESCENCE, HERALD, MARKER, TimeTagStream


# --------------------------------------------------------------------------
# continuous quantum-jump experiment

@dataclass
class AnalysisConfig:
    t_b: float = 1e-3
    N: int = 10
    g2_bin: float = 2e-3
    g2_range: float = 0.2


@dataclass
class JumpExperimentConfig:
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    reference: bool = True  # also run with the source blocked to get tau_off


@dataclass
class JumpExperimentReport:
    tau_on: float
    tau_on_error: float
    n_on: int
    tau_off: float | None
    tau_off_error: float | None
    n_off: int
    rate: float | None
    rate_error: float | None
    histogram: CorrelationHistogram | None
    significance: float | None
    n_heralds: int
    analysis: JumpAnalysis

    def as_dict(self) -> dict:
        h = self.histogram
        return {
            "tau_on": self.tau_on, "tau_on_error": self.tau_on_error, "n_dark_periods_on": self.n_on,
            "tau_off": self.tau_off, "tau_off_error": self.tau_off_error, "n_dark_periods_off": self.n_off,
            "absorption_rate": self.rate, "absorption_rate_error": self.rate_error,
            "n_heralds": self.n_heralds, "n_first_photons": int(self.analysis.on_times.size),
            "n_threshold": self.analysis.n_th, "tau_threshold": self.analysis.tau_th,
            "mean_bright": self.analysis.mean_bright, "mean_dark": self.analysis.mean_dark,
            "g2_bin_width": h.bin_width if h else None,
            "g2_background": h.background if h else None,
            "g2_peak_lag": h.peak_lag if h else None,
            "g2_peak_counts": h.peak_counts if h else None,
            "g2_zero_lag_counts": h.at_zero() if h else None,
            "significance": self.significance,
        }

    def curve(self) -> list[tuple[float, int]]:
        if self.histogram is None:
            return []
        return list(zip(self.histogram.lags.tolist(), self.histogram.counts.tolist()))


def _dark_fit(stream: TimeTagStream, a: AnalysisConfig):
    res = analyze_jumps(stream, FLUORESCENCE, a.t_b, a.N)
    d = dark_period_durations(res.off_times, res.on_times)
    return res, fit_exponential(d), d.size


def run_quantum_jump_experiment(cfg: JumpExperimentConfig, table: TransitionTable | None = None) -> JumpExperimentReport:
    """Simulate, extract jumps, fit dark periods and correlate with heralds."""
    traj = cfg.trajectory
    if traj.scheme not in ("A", "B") or traj.sequence is not None:
        raise ValueError("the quantum-jump experiment needs continuous scheme A or B")
    a = cfg.analysis
    stream, _ = simulate(traj, table)
    res, fit_on, n_on = _dark_fit(stream, a)
    heralds = stream.times(HERALD)

    tau_off = tau_off_err = rate = rate_err = None
    n_off = 0
    if cfg.reference:
        off = replace(traj, source=replace(traj.source, pair_rate=0.0), absorption_peak_rate=0.0,
                      trajectory=traj.trajectory + 1_000_000)
        ref_stream, _ = simulate(off, table)
        _, fit_off, n_off = _dark_fit(ref_stream, a)
        del ref_stream
        tau_off, tau_off_err = fit_off["tau"], fit_off.errors["tau"]
        ton, ston = fit_on["tau"], fit_on.errors["tau"]
        rate = 1.0 / ton - 1.0 / tau_off
        rate_err = float(np.hypot(ston / ton ** 2, tau_off_err / tau_off ** 2))

    hist = sig = None
    if heralds.size and res.on_times.size:
        hist = g2(heralds, res.on_times, a.g2_bin, a.g2_range)
        sig = hist.significance if hist.background > 0 else float("inf")
    return JumpExperimentReport(fit_on["tau"], fit_on.errors["tau"], n_on, tau_off, tau_off_err, n_off,
                                rate, rate_err, hist, sig, int(heralds.size), res)


def calibrate_coincidences(peak: float = 83.0, background: float = 13.6, duration: float = 3000.0,
                           bin_width: float = 2e-3, added_rate: float = 0.581, tau0: float = 1.11,
                           pump_rate_850: float = 20.0, source: SourceConfig | None = None,
                           atom_fwhm: float = 22.0, table: TransitionTable | None = None) -> dict:
    """Source settings giving an expected zero-lag peak and per-bin background.

    ``added_rate`` is the rate of absorptions that end a dark period (it
    already excludes decays back to D5/2).  Returns herald efficiency, pair
    rate and absorption peak rate, plus the expected jump counts.
    """
    table = table or default_table()
    src = source or SourceConfig()
    jump_rate = 1.0 / (1.0 / pump_rate_850 + 1.0 / (1.0 / tau0 + added_rate))
    jumps = jump_rate * duration
    absorbed = jumps * added_rate / (1.0 / tau0 + added_rate)
    # herald probability given absorption: filter times atom line over atom line
    kappa = src.filter_fwhm / (src.filter_fwhm + atom_fwhm)
    eta = peak / (absorbed * kappa)
    if not 0 < eta <= 1:
        raise ValueError(f"peak {peak} needs herald efficiency {eta:.3g}, outside (0, 1]")
    herald_rate = background / (jump_rate * duration * bin_width)
    trial = replace(src, herald_efficiency=eta, pair_rate=1.0)
    pair_rate = herald_rate / herald_fraction(trial)
    peak_rate = added_rate / (1.0 - table.branching("P3/2", "D5/2"))
    c = peak_rate / (pair_rate * raw_overlap(src.raw_fwhm_mhz, atom_fwhm, 0.0))
    if c > 1:
        raise ValueError("background target too low for the requested absorption rate")
    return {"herald_efficiency": eta, "pair_rate": pair_rate, "absorption_peak_rate": peak_rate,
            "herald_rate": herald_rate, "expected_jumps": jumps, "expected_absorption_jumps": absorbed,
            "absorption_per_pair": c}


def calibrated_jump_config(duration: float = 3000.0, r_on: float = 2e4, r_dark: float = 500.0,
                           pump_rate_850: float = 20.0, master_seed: int = 0, **targets) -> JumpExperimentConfig:
    """Quantum-jump run whose expected peak / background hit the given targets."""
    cal = calibrate_coincidences(duration=duration, pump_rate_850=pump_rate_850, **targets)
    src = SourceConfig(pair_rate=cal["pair_rate"], herald_efficiency=cal["herald_efficiency"],
                       signal_polarization=PolarizationState.from_label("H"))
    traj = TrajectoryConfig(scheme="B", duration=duration, r_on=r_on, r_dark=r_dark,
                            pump_rate_850=pump_rate_850, source=src,
                            absorption_peak_rate=cal["absorption_peak_rate"], master_seed=master_seed)
    bw = targets.get("bin_width", 2e-3)
    return JumpExperimentConfig(traj, AnalysisConfig(g2_bin=bw, g2_range=100 * bw), reference=False)


# --------------------------------------------------------------------------
# pulsed coincidence experiments

@dataclass
class PulsedConfig:
    """Shared settings for pulsed absorption runs (one simulation per setting)."""

    duration: float = 120.0  # per setting
    r_on: float = 5e4
    r_dark: float = 500.0
    tau0: float = 1.11
    absorption_peak_rate: float = 100.0
    herald_efficiency: float = 0.5
    filter_fwhm: float = 22.0
    atom_fwhm: float = 22.0
    field_gauss: float = 3.0
    cooling: float = 5e-3
    pumping: float = 0.2e-3
    detection: float = 2e-3
    coincidence_bin: float = 10e-6
    lag_range: float = 1e-3
    t_b: float = 1e-3
    N: int = 10
    jitter_fwhm: float = 1e-9
    master_seed: int = 0

    def sequence(self, sign: int = +1) -> PulseSequence:
        return PulseSequence.pulsed_absorption(self.cooling, self.pumping, self.detection, sign)

    def source(self, **kw) -> SourceConfig:
        base = SourceConfig(filter_fwhm=self.filter_fwhm, herald_efficiency=self.herald_efficiency)
        base = replace(base, **kw)
        need = self.absorption_peak_rate / raw_overlap(base.raw_fwhm_mhz, self.atom_fwhm, 0.0)
        return replace(base, pair_rate=need * (1 + 1e-6))

    @property
    def peak_bins(self) -> int:
        """Bins summed for the coincidence peak: five bright-photon delays."""
        return int(np.ceil(5.0 / (self.r_on * self.coincidence_bin)))

    def trajectory(self, source: SourceConfig, absorber: Absorber, sign: int, index: int) -> TrajectoryConfig:
        return TrajectoryConfig(scheme="B", duration=self.duration, r_on=self.r_on, r_dark=self.r_dark,
                                tau0=self.tau0, source=source, absorption_peak_rate=self.absorption_peak_rate,
                                absorber=absorber, sequence=self.sequence(sign), jitter_fwhm=self.jitter_fwhm,
                                master_seed=self.master_seed, trajectory=index)


def gated_means(stream: TimeTagStream, window: float, t_b: float) -> tuple[float, float]:
    """Bright / dark counts per bin from bins lying inside detection windows.

    Window starts come from the marker channel, so dead time during cooling
    never enters the count histogram.
    """
    starts = stream.times(MARKER)
    k = int(np.floor(window / t_b + 1e-9))
    if starts.size == 0 or k == 0:
        raise ValueError("no gated detection bins")
    edges = (starts[:, None] + t_b * np.arange(k + 1)[None, :])
    t = stream.times(FLUORESCENCE)
    idx = np.searchsorted(t, edges.ravel()).reshape(edges.shape)
    counts = np.diff(idx, axis=1).ravel()
    return estimate_state_means(np.bincount(counts))


@dataclass
class Coincidences:
    raw: int
    background: float
    background_bins: int
    n_bins: int
    histogram: CorrelationHistogram

    @property
    def net(self) -> float:
        return self.raw - self.n_bins * self.background

    @property
    def expected_background(self) -> float:
        return self.n_bins * self.background

    @property
    def error(self) -> float:
        var = max(self.raw, 1) + self.n_bins ** 2 * self.background / self.background_bins
        return float(np.sqrt(var))


def measure_coincidences(stream: TimeTagStream, cfg: PulsedConfig) -> Coincidences:
    """Herald / first-bright-photon coincidences in the peak window."""
    window = cfg.detection
    mb, md = gated_means(stream, window, cfg.t_b)
    res = analyze_jumps(stream, FLUORESCENCE, cfg.t_b, cfg.N, means=(mb, md))
    h = g2(stream.times(HERALD), res.on_times, cfg.coincidence_bin, cfg.lag_range)
    K = h.zero_index
    n = cfg.peak_bins
    if n > K:
        raise ValueError("lag range is shorter than the coincidence window")
    raw = int(h.counts[K:K + n].sum())
    return Coincidences(raw, h.background, h.counts.size - 3, n, h)


def _run_setting(cfg: PulsedConfig, source: SourceConfig, absorber: Absorber, sign: int,
                 index: int, table) -> Coincidences:
    stream, _ = simulate(cfg.trajectory(source, absorber, sign, index), table)
    return measure_coincidences(stream, cfg)


def sigma_absorber(cfg: PulsedConfig, sign: int, table: TransitionTable | None = None) -> Absorber:
    """Ion pumped to the outer D5/2 sublevels; ``sign=+1`` accepts sigma-minus."""
    B = MagneticField(cfg.field_gauss)
    lines = tuple(sigma_line_offsets(sign, B, table))
    accepted = PolarizationState.from_sigma(*((0.0, 1.0) if sign > 0 else (1.0, 0.0)))
    return Absorber(accepted, lines, cfg.atom_fwhm)


@dataclass
class ScanPoint:
    setting: str
    x: float
    raw: int
    background: float
    net: float
    error: float


@dataclass
class PolarizationScanReport:
    points: list[ScanPoint]
    overlaps: np.ndarray
    slope: float
    intercept: float
    r_squared: float

    def as_dict(self) -> dict:
        return {"settings": [p.setting for p in self.points],
                "overlap": self.overlaps.tolist(),
                "raw": [p.raw for p in self.points],
                "background": [p.background for p in self.points],
                "net": [p.net for p in self.points],
                "error": [p.error for p in self.points],
                "malus_slope": self.slope, "malus_intercept": self.intercept,
                "malus_r_squared": self.r_squared}


def malus_fit(overlaps, y, err) -> tuple[float, float, float]:
    """Weighted straight line ``y = M overlap + c``; returns (M, c, R^2)."""
    x, y, err = (np.asarray(v, float) for v in (overlaps, y, err))
    X = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(X / err[:, None], y / err, rcond=None)
    resid = y - X @ coef
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else float("nan")
    return float(coef[0]), float(coef[1]), float(r2)


def _label(p: PolarizationState) -> str:
    for name in ("H", "V", "D", "A", "L", "R"):
        if overlap(p, PolarizationState.from_label(name)) > 1 - 1e-12:
            return name
    return "S(%.3f,%.3f,%.3f)" % tuple(p.stokes())


def run_polarization_scan(cfg: PulsedConfig, settings, sign: int = +1,
                          table: TransitionTable | None = None) -> PolarizationScanReport:
    """Coincidence peak for each input photon polarization (PBS source)."""
    table = table or default_table()
    absorber = sigma_absorber(cfg, sign, table)
    points, ov = [], []
    for k, s in enumerate(settings):
        pol = PolarizationState.from_label(s) if isinstance(s, str) else s
        src = cfg.source(splitter="PBS", signal_polarization=pol)
        c = _run_setting(cfg, src, absorber, sign, k, table)
        ov.append(overlap(pol, absorber.accepted))
        points.append(ScanPoint(_label(pol), ov[-1], c.raw, c.expected_background, c.net, c.error))
    ov = np.array(ov)
    m, b, r2 = malus_fit(ov, [p.net for p in points], [p.error for p in points])
    return PolarizationScanReport(points, ov, m, b, r2)


@dataclass
class SpectroscopyReport:
    detunings: np.ndarray  # heralded signal detuning, MHz
    points: dict[str, list[ScanPoint]]
    fits: dict[str, FitResult]

    def as_dict(self) -> dict:
        out = {"signal_detuning_mhz": self.detunings.tolist()}
        for name, pts in self.points.items():
            f = self.fits[name]
            out[name] = {"rate": [p.net for p in pts], "rate_error": [p.error for p in pts],
                         "center": f["center"], "center_error": f.errors["center"],
                         "fwhm": f["fwhm"], "fwhm_error": f.errors["fwhm"]}
        return out


def run_spectroscopy_scan(cfg: PulsedConfig, filter_detunings, table: TransitionTable | None = None
                          ) -> SpectroscopyReport:
    """Net coincidence rate against heralded signal detuning for both preparations.

    The herald filter selects idler detuning ``d``, so the heralded signal
    sits at ``-d`` (pump locked).  Each preparation gets its own Lorentzian.
    """
    table = table or default_table()
    det = np.asarray(filter_detunings, float)
    points, fits = {}, {}
    for j, (name, sign, label) in enumerate((("sigma+", -1, "L"), ("sigma-", +1, "R"))):
        absorber = sigma_absorber(cfg, sign, table)
        pts = []
        for k, d in enumerate(det):
            src = cfg.source(splitter="PBS", signal_polarization=PolarizationState.from_label(label),
                             filter_detuning=float(d))
            c = _run_setting(cfg, src, absorber, sign, 1000 * (j + 1) + k, table)
            pts.append(ScanPoint(name, float(-d), c.raw, c.expected_background,
                                 c.net / cfg.duration, c.error / cfg.duration))
        points[name] = pts
        fits[name] = fit_lorentzian([p.x for p in pts], [p.net for p in pts], [p.error for p in pts])
    return SpectroscopyReport(-det, points, fits)


BASES = {
    # accepted signal polarization and herald quarter-wave plate angle
    "RL": ("R", 45.0),
    "HV": ("H", None),
    "DA": ("D", None),
}


@dataclass
class EntanglementScanReport:
    basis: str
    angles: np.ndarray
    points: list[ScanPoint]
    fit: FitResult

    @property
    def visibility(self) -> float:
        return self.fit.visibility

    def as_dict(self) -> dict:
        return {"basis": self.basis, "hwp_deg": self.angles.tolist(),
                "raw": [p.raw for p in self.points], "background": [p.background for p in self.points],
                "net": [p.net for p in self.points], "error": [p.error for p in self.points],
                "visibility": self.fit.visibility, "visibility_error": self.fit.visibility_error,
                "amplitude": self.fit["amplitude"], "offset": self.fit["offset"],
                "phase": self.fit["phase"]}


def run_entanglement_scan(cfg: PulsedConfig, basis: str, hwp_angles,
                          pair_state: PairPolarizationState | None = None,
                          table: TransitionTable | None = None) -> EntanglementScanReport:
    """Coincidences against the herald half-wave plate angle (NPBS source).

    The ion accepts one polarization of the chosen basis; the herald passes
    an optional quarter-wave plate (RL basis), the half-wave plate and a
    polarizer.  The net counts are fitted with a 90 degree sinusoid.
    """
    if basis not in BASES:
        raise ValueError(f"basis must be one of {sorted(BASES)}")
    table = table or default_table()
    label, qwp = BASES[basis]
    accepted = PolarizationState.from_label(label)
    if basis == "RL":
        absorber = sigma_absorber(cfg, +1, table)
    else:
        absorber = Absorber(accepted, ((0.0, 1.0),), cfg.atom_fwhm)
    state = pair_state or PairPolarizationState.bell()
    angles = np.asarray(hwp_angles, float)
    offset = {"RL": 0, "HV": 1, "DA": 2}[basis] * 10_000
    pts = []
    for k, th in enumerate(angles):
        src = cfg.source(splitter="NPBS", pair_state=state, herald_analyzer=Analyzer(hwp_deg=float(th), qwp_deg=qwp))
        c = _run_setting(cfg, src, absorber, +1, offset + k, table)
        pts.append(ScanPoint(f"{th:g}", float(th), c.raw, c.expected_background, c.net, c.error))
    fit = fit_sinusoid_fixed_period(angles, [p.net for p in pts], [p.error for p in pts], 90.0)
    return EntanglementScanReport(basis, angles, pts, fit)
