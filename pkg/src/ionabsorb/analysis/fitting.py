"""Model fits used by the analysis: dark-period exponential, Lorentzian lines,
fixed-period sinusoids.  Parameter uncertainties come from the inverse Fisher
information (``(J^T W J)^-1`` for least squares) at the optimum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize


class FitError(RuntimeError):
    pass


@dataclass
class FitResult:
    model: str
    params: dict[str, float]
    errors: dict[str, float]
    residual_norm: float = 0.0
    visibility: float | None = None
    visibility_error: float | None = None

    def __getitem__(self, name):
        return self.params[name]


def fit_exponential(durations) -> FitResult:
    """Maximum-likelihood decay constant: the sample mean, error tau / sqrt(n)."""
    d = np.asarray(durations, float)
    if d.size < 1:
        raise FitError("no durations to fit")
    tau = float(d.mean())
    return FitResult("exponential", {"tau": tau}, {"tau": tau / np.sqrt(d.size)})


def lorentzian_model(x, center, fwhm, amplitude, offset):
    return offset + amplitude / (1.0 + (2.0 * (x - center) / fwhm) ** 2)


def _sorted_points(x, y, err):
    x, y, err = (np.asarray(v, float) for v in (x, y, err))
    order = np.lexsort((err, y, x))
    return x[order], y[order], err[order]


def fit_lorentzian(x, y, err, max_iter: int = 200) -> FitResult:
    """Weighted Levenberg-Marquardt fit of a Lorentzian plus constant offset."""
    x, y, err = _sorted_points(x, y, err)
    if x.size < 5:
        raise FitError("need at least 5 points")
    if np.any(err <= 0):
        raise FitError("errors must be positive")
    offset = float(y.min())
    amp = float(y.max() - offset)
    center = float(x[np.argmax(y)])
    wts = np.clip(y - offset, 0, None)
    if wts.sum() > 0:
        mean = np.sum(wts * x) / wts.sum()
        fwhm = 2.0 * np.sqrt(np.sum(wts * (x - mean) ** 2) / wts.sum())
    else:
        fwhm = float(np.ptp(x)) / 4
    fwhm = fwhm if fwhm > 0 else float(np.ptp(x)) / 4
    p0 = [center, fwhm, amp, offset]

    def resid(p):
        return (lorentzian_model(x, *p) - y) / err

    sol = optimize.least_squares(resid, p0, method="lm", max_nfev=max_iter * (len(p0) + 1),
                                 xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if sol.status <= 0:
        raise FitError(f"Lorentzian fit did not converge: {sol.message}")
    p = sol.x
    p[1] = abs(p[1])
    cov = _covariance(sol.jac)
    names = ("center", "fwhm", "amplitude", "offset")
    return FitResult("lorentzian", dict(zip(names, map(float, p))),
                     dict(zip(names, map(float, np.sqrt(np.diag(cov))))),
                     float(np.linalg.norm(sol.fun)))


def _covariance(jac) -> np.ndarray:
    fisher = jac.T @ jac
    try:
        return np.linalg.inv(fisher)
    except np.linalg.LinAlgError:
        return np.linalg.pinv(fisher)


def fit_sinusoid_fixed_period(angle, y, err, period: float) -> FitResult:
    """Linear least squares of ``offset + a sin(2 pi x / P) + b cos(2 pi x / P)``.

    Visibility is amplitude over offset.
    """
    x, y, err = _sorted_points(angle, y, err)
    if x.size < 4:
        raise FitError("need at least 4 points")
    if np.ptp(x) < period * (1 - 1e-9) * (x.size - 1) / x.size:
        raise FitError("points must span at least one period")
    if np.any(err <= 0):
        raise FitError("errors must be positive")
    ph = 2 * np.pi * x / period
    X = np.column_stack([np.sin(ph), np.cos(ph), np.ones_like(ph)]) / err[:, None]
    if np.linalg.matrix_rank(X) < 3:
        raise FitError("degenerate design matrix")
    coef, *_ = np.linalg.lstsq(X, y / err, rcond=None)
    cov = _covariance(X)
    a, b, off = coef
    amp = float(np.hypot(a, b))
    # gradient of amplitude wrt (a, b)
    g_amp = np.array([a, b, 0.0]) / amp if amp > 0 else np.zeros(3)
    amp_err = float(np.sqrt(g_amp @ cov @ g_amp))
    phase = float(np.arctan2(b, a))
    g_ph = np.array([-b, a, 0.0]) / amp ** 2 if amp > 0 else np.zeros(3)
    vis = amp / off
    g_vis = g_amp / off - np.array([0, 0, amp / off ** 2])
    resid = X @ coef - y / err
    return FitResult(
        "sinusoid_fixed_period",
        {"amplitude": amp, "phase": phase, "offset": float(off)},
        {"amplitude": amp_err, "phase": float(np.sqrt(g_ph @ cov @ g_ph)),
         "offset": float(np.sqrt(cov[2, 2]))},
        float(np.linalg.norm(resid)), float(vis), float(np.sqrt(g_vis @ cov @ g_vis)))
