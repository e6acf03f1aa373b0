"""Quantum-jump extraction from a fluorescence detection stream.

Three steps: pick the count threshold that best separates the bright and dark
count distributions, locate crossings of a moving-average rate estimate, and
pin each jump to the first (or last) fluorescence photon using a delay
threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..timetags import FLUORESCENCE, TimeTagStream

ON, OFF = "dark_to_bright", "bright_to_dark"


class AmbiguousWindowError(ValueError):
    """No gap in the buffered detections satisfies the delay-threshold test."""


class MixtureFitError(RuntimeError):
    pass


def _times(stream, channel):
    if isinstance(stream, TimeTagStream):
        return stream.times(channel)
    return np.asarray(stream, dtype=float)


@dataclass
class FluorescenceTrace:
    t_b: float
    counts: np.ndarray

    def histogram(self) -> np.ndarray:
        return np.bincount(self.counts)


def bin_counts(stream, channel: int = FLUORESCENCE, t_b: float = 1e-3,
               duration: float | None = None) -> FluorescenceTrace:
    """Detections per half-open bin ``[i t_b, (i+1) t_b)``."""
    if t_b <= 0:
        raise ValueError("bin size must be positive")
    t = _times(stream, channel)
    if duration is None:
        duration = float(t.max()) if t.size else 0.0
        n = int(np.floor(duration / t_b)) + 1 if t.size else 0
    else:
        n = int(np.ceil(duration / t_b))
    idx = np.floor(t / t_b).astype(np.int64)
    idx = idx[idx < n]
    return FluorescenceTrace(t_b, np.bincount(idx, minlength=n).astype(np.int64))


def misclassification(n, mean_bright: float, mean_dark: float):
    """P(dark bin counted >= n) + P(bright bin counted < n)."""
    n = np.asarray(n)
    return stats.poisson.sf(n - 1, mean_dark) + stats.poisson.cdf(n - 1, mean_bright)


def optimal_count_threshold(mean_bright: float, mean_dark: float) -> int:
    """Integer count threshold minimizing the misclassification sum.

    A bin with ``n >= n_th`` counts is called bright.  Candidates run over the
    integers in ``(mean_dark, ceil(mean_bright)]``; ties go to the smaller value.
    """
    if not mean_bright > mean_dark >= 0:
        raise ValueError("need mean_bright > mean_dark >= 0")
    lo = int(np.floor(mean_dark)) + 1
    hi = max(int(np.ceil(mean_bright)), lo)
    n = np.arange(lo, hi + 1)
    f = misclassification(n, mean_bright, mean_dark)
    return int(n[np.argmin(f)])


def estimate_state_means(histogram, max_iter: int = 500, tol: float = 1e-10,
                         init: tuple[float, float] | None = None) -> tuple[float, float]:
    """Two-component Poisson mixture fit of a count histogram by EM.

    ``histogram[k]`` is the number of bins with ``k`` counts.  Starts from the
    lower and upper quartiles of the observed support unless ``init`` is
    given.  Returns ``(mean_bright, mean_dark)``.
    """
    h = np.asarray(histogram, dtype=float)
    k = np.arange(h.size)
    support = k[h > 0]
    if support.size < 2:
        raise MixtureFitError("histogram has a single occupied count value")
    if init is None:
        lo, hi = np.percentile(support, [25, 75])
    else:
        lo, hi = sorted(init)
    mu = np.array([max(lo, 1e-3), max(hi, 2e-3)])
    w = np.array([0.5, 0.5])
    k, h = k[h > 0], h[h > 0]
    for _ in range(max_iter):
        logp = stats.poisson.logpmf(k[:, None], mu[None, :]) + np.log(w)[None, :]
        logp -= logp.max(axis=1, keepdims=True)
        r = np.exp(logp)
        r /= r.sum(axis=1, keepdims=True)
        nk = (h[:, None] * r).sum(axis=0)
        if np.any(nk <= 1e-9 * h.sum()):
            raise MixtureFitError("one mixture component emptied; histogram looks single-state")
        new_mu = (h[:, None] * r * k[:, None]).sum(axis=0) / nk
        new_w = nk / h.sum()
        done = np.max(np.abs(new_mu - mu)) <= tol * max(1.0, mu.max())
        mu, w = new_mu, new_w
        if done:
            break
    else:
        raise MixtureFitError(f"EM did not converge in {max_iter} iterations")
    if abs(mu[1] - mu[0]) < 1e-6 * max(mu.max(), 1e-12):
        raise MixtureFitError("mixture components coincide")
    return float(mu.max()), float(mu.min())


@dataclass
class JumpEvent:
    direction: str
    window: np.ndarray
    time: float | None = None


def rate_estimate(t: np.ndarray, N: int, t_b: float) -> np.ndarray:
    """Counts per bin estimated from each run of N consecutive detections.

    Element ``j`` covers detections ``j .. j+N-1``.
    """
    span = t[N - 1:] - t[:t.size - N + 1]
    with np.errstate(divide="ignore"):
        return np.where(span > 0, (N - 1) * t_b / np.where(span > 0, span, 1.0), np.inf)


def detect_jumps(stream, channel: int = FLUORESCENCE, n_th: float = 6, t_b: float = 1e-3,
                 N: int = 10, direction: str = ON) -> list[JumpEvent]:
    """Buffered detection windows around each threshold crossing.

    The moving average is the count rate, in counts per bin, over a buffer
    of the last ``N`` detections.  A dark-to-bright crossing happens between
    buffers ``j`` and ``j+1`` when the first estimate is below ``n_th`` and
    the second is not; bright-to-dark mirrors this.  The window handed on is
    the union of the two buffers, i.e. ``N + 1`` detection times, so it
    always contains the gap where the rate changed.
    """
    if N < 2:
        raise ValueError("window size N must be >= 2")
    if direction not in (ON, OFF):
        raise ValueError(f"direction must be {ON!r} or {OFF!r}")
    t = _times(stream, channel)
    if t.size < N + 1:
        return []
    nbar = rate_estimate(t, N, t_b)
    below = nbar < n_th
    if direction == ON:
        j = np.flatnonzero(below[:-1] & ~below[1:])
    else:
        j = np.flatnonzero(~below[:-1] & below[1:])
    return [JumpEvent(direction, t[i:i + N + 1].copy()) for i in j]


def p_det(tau, r_on: float, r_off: float):
    """Probability of calling a transition correctly at delay threshold ``tau``."""
    tau = np.asarray(tau, dtype=float)
    return np.exp(-r_off * tau) * (1.0 - np.exp(-r_on * tau))


def optimal_delay_threshold(r_on: float, r_off: float) -> float:
    """Maximizer of :func:`p_det`, ``log(1 + r_on / r_off) / r_on``."""
    if r_on <= 0 or r_off <= 0:
        raise ValueError("rates must be positive")
    return float(np.log1p(r_on / r_off) / r_on)


def extract_transition_photon(window, tau_th: float, direction: str = ON) -> float:
    """Time of the photon marking the jump inside a buffered window.

    Dark-to-bright: the earliest detection preceded by a gap longer than
    ``tau_th`` and followed by one shorter than it (first bright photon).
    Bright-to-dark: the latest detection followed by a long gap and preceded
    by a short one (last bright photon).
    """
    t = np.asarray(window, dtype=float)
    if t.size == 0:
        raise AmbiguousWindowError("empty window")
    gaps = np.diff(t)
    if direction == ON:
        ok = (gaps[:-1] > tau_th) & (gaps[1:] < tau_th)
        idx = np.flatnonzero(ok)
        if idx.size == 0:
            raise AmbiguousWindowError("no long gap followed by a short one")
        return float(t[idx[0] + 1])
    if direction == OFF:
        ok = (gaps[1:] > tau_th) & (gaps[:-1] < tau_th)
        idx = np.flatnonzero(ok)
        if idx.size == 0:
            raise AmbiguousWindowError("no short gap followed by a long one")
        return float(t[idx[-1] + 1])
    raise ValueError(f"unknown direction {direction!r}")


@dataclass
class JumpAnalysis:
    t_b: float
    N: int
    mean_bright: float
    mean_dark: float
    n_th: int
    tau_th: float
    on_times: np.ndarray
    off_times: np.ndarray
    ambiguous: int = 0
    trace: FluorescenceTrace | None = field(default=None, repr=False)


def analyze_jumps(stream, channel: int = FLUORESCENCE, t_b: float = 1e-3, N: int = 10,
                  means: tuple[float, float] | None = None) -> JumpAnalysis:
    """Full three-step pipeline on one fluorescence channel."""
    trace = bin_counts(stream, channel, t_b)
    mb, md = means if means is not None else estimate_state_means(trace.histogram())
    n_th = optimal_count_threshold(mb, md)
    tau = optimal_delay_threshold(mb / t_b, max(md, 1e-12) / t_b)
    t = _times(stream, channel)
    out, bad = {}, 0
    for direction in (ON, OFF):
        times = []
        for ev in detect_jumps(t, channel, n_th, t_b, N, direction):
            try:
                ev.time = extract_transition_photon(ev.window, tau, direction)
            except AmbiguousWindowError:
                bad += 1
                continue
            times.append(ev.time)
        out[direction] = np.array(times)
    return JumpAnalysis(t_b, N, mb, md, n_th, tau, out[ON], out[OFF], bad, trace)


def dark_period_durations(off_times, on_times) -> np.ndarray:
    """Dark-period lengths from bright->dark followed by dark->bright events.

    Events are merged in time order; an on event counts only when the event
    right before it is an off event, so unpaired jumps at the edges (or after
    a missed detection) are dropped.
    """
    off_times = np.asarray(off_times, float)
    on_times = np.asarray(on_times, float)
    t = np.concatenate([off_times, on_times])
    kind = np.concatenate([np.zeros(off_times.size, int), np.ones(on_times.size, int)])
    order = np.argsort(t, kind="stable")
    t, kind = t[order], kind[order]
    pair = (kind[:-1] == 0) & (kind[1:] == 1)
    return t[1:][pair] - t[:-1][pair]


def derived_absorption_rate(tau_on: float, tau_off: float) -> float:
    """Extra dark->bright rate implied by a shortened dark-period constant."""
    if not 0 < tau_on <= tau_off:
        raise ValueError("need 0 < tau_on <= tau_off")
    return 1.0 / tau_on - 1.0 / tau_off
