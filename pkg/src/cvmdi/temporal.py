"""
Temporal modes and mode-matching coefficients.

A waveform is stored as a baseband envelope sampled on a uniform grid plus a
carrier offset ``carrier`` (rad/s). The full complex wave packet is
``envelope(t) * exp(-1j * carrier * t)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateWaveformError, ValidationError

NORM_TOL = 1e-6


def _trapz(y: np.ndarray, dt: float):
    return np.trapezoid(y, dx=dt) if hasattr(np, "trapezoid") else np.trapz(y, dx=dt)


@dataclass(frozen=True)
class TemporalMode:
    """Sampled complex envelope on a uniform time grid."""

    t0: float
    dt: float
    samples: np.ndarray = field(repr=False)
    carrier: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.ndim != 1 or s.size < 2:
            raise ValidationError("a temporal mode needs at least 2 samples")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(s)):
            raise ValidationError("waveform samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.samples.size)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (self.samples.size - 1)

    def waveform(self, t=None) -> np.ndarray:
        """Full wave packet including the carrier, on the native grid or at times ``t``."""
        if t is None:
            t = self.times
            env = self.samples
        else:
            t = np.asarray(t, dtype=float)
            ts = self.times
            env = np.interp(t, ts, self.samples.real, left=0.0, right=0.0) + 1j * np.interp(
                t, ts, self.samples.imag, left=0.0, right=0.0
            )
        if self.carrier == 0.0:
            return np.asarray(env, dtype=complex)
        return env * np.exp(-1j * self.carrier * t)

    def energy(self) -> float:
        return float(_trapz(np.abs(self.samples) ** 2, self.dt))

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.energy() - 1.0) <= tol


def normalize(mode: TemporalMode) -> TemporalMode:
    """Rescale ``mode`` to unit L2 norm (trapezoidal rule), keeping relative phases."""
    e = mode.energy()
    if e <= 0 or not np.isfinite(e):
        raise DegenerateWaveformError("cannot normalize a waveform with zero energy")
    return TemporalMode(mode.t0, mode.dt, mode.samples / np.sqrt(e), mode.carrier)


@dataclass(frozen=True)
class DetectorMode:
    """Local-oscillator envelope and carrier that define a homodyne detector's mode."""

    lo: TemporalMode
    omega_lo: float = 0.0

    @property
    def sigma_cal(self) -> float:
        e = self.lo.energy()
        if e <= 0:
            raise DegenerateWaveformError("local-oscillator envelope has zero energy")
        return float(np.sqrt(e))


def detector_tm(det: DetectorMode) -> TemporalMode:
    """Detector temporal mode ``xi_LO(t) exp(-i w_LO t) / sigma_cal``."""
    s = det.sigma_cal
    return TemporalMode(det.lo.t0, det.lo.dt, det.lo.samples / s, det.lo.carrier + det.omega_lo)


def _common_grid(a: TemporalMode, b: TemporalMode) -> np.ndarray | None:
    same = (
        a.samples.size == b.samples.size
        and np.isclose(a.dt, b.dt, rtol=1e-12, atol=0)
        and np.isclose(a.t0, b.t0, rtol=0, atol=1e-9 * a.dt)
    )
    if same:
        return None
    lo = min(a.t0, b.t0)
    hi = max(a.t_end, b.t_end)
    if max(a.t0, b.t0) >= min(a.t_end, b.t_end):
        raise ValidationError("temporal modes have disjoint support")
    dt = min(a.dt, b.dt)
    n = int(np.floor((hi - lo) / dt + 1e-9)) + 1
    return lo + dt * np.arange(n)


def mode_match(signal: TemporalMode, detector: TemporalMode) -> float:
    """
    Mode-matching coefficient ``|int Xi*(t) xi(t) dt|^2`` in [0, 1].

    Both modes must already be unit-norm. If their grids differ, both are
    linearly interpolated onto a grid with the finer step spanning the union
    of their supports.
    """
    for name, m in (("signal", signal), ("detector", detector)):
        if not m.is_normalized():
            raise ValidationError(f"{name} mode is not unit-norm (energy {m.energy():.9g})")
    grid = _common_grid(signal, detector)
    if grid is None:
        xs, xd, dt = signal.waveform(), detector.waveform(), signal.dt
    else:
        xs, xd, dt = signal.waveform(grid), detector.waveform(grid), grid[1] - grid[0]
    overlap = _trapz(np.conj(xd) * xs, dt)
    return float(min(1.0, max(0.0, abs(overlap) ** 2)))


def apply_mismatch(mean_in: float, var_in: float, eta_m: float) -> tuple[float, float]:
    """First and second moments of a quadrature seen through a detector with matching ``eta_m``."""
    if not 0.0 <= eta_m <= 1.0:
        raise ValidationError(f"eta_m must lie in [0, 1], got {eta_m}")
    if var_in < 0:
        raise ValidationError(f"variance must be non-negative, got {var_in}")
    return float(np.sqrt(eta_m) * mean_in), float(eta_m * var_in + 1.0 - eta_m)


# -- built-in waveform families ---------------------------------------------

def _grid(span: float, n: int, center: float) -> tuple[float, float]:
    if n < 2:
        raise ValidationError("need at least 2 samples")
    dt = span / (n - 1)
    return center - span / 2, dt


def gaussian_mode(sigma: float, *, center: float = 0.0, carrier: float = 0.0,
                  span: float | None = None, n: int = 4001) -> TemporalMode:
    """Unit-norm Gaussian whose intensity ``|xi|^2`` has standard deviation ``sigma``."""
    if sigma <= 0:
        raise ValidationError("sigma must be positive")
    span = 24.0 * sigma if span is None else span
    t0, dt = _grid(span, n, center)
    t = t0 + dt * np.arange(n)
    env = np.exp(-((t - center) ** 2) / (4.0 * sigma**2))
    return normalize(TemporalMode(t0, dt, env, carrier))


def raised_cosine_mode(width: float, *, center: float = 0.0, carrier: float = 0.0,
                       n: int = 4001, pad: float = 0.25) -> TemporalMode:
    """Unit-norm raised-cosine (Hann) pulse of full width ``width``."""
    if width <= 0:
        raise ValidationError("width must be positive")
    span = width * (1.0 + 2.0 * pad)
    t0, dt = _grid(span, n, center)
    t = t0 + dt * np.arange(n)
    u = (t - center) / width
    env = np.where(np.abs(u) <= 0.5, 0.5 * (1.0 + np.cos(2.0 * np.pi * u)), 0.0)
    return normalize(TemporalMode(t0, dt, env, carrier))


def rectangular_mode(width: float, *, center: float = 0.0, carrier: float = 0.0,
                     n: int = 4001, normalized: bool = True) -> TemporalMode:
    """Rectangular pulse sampled exactly on ``[center - width/2, center + width/2]``."""
    if width <= 0:
        raise ValidationError("width must be positive")
    t0, dt = _grid(width, n, center)
    m = TemporalMode(t0, dt, np.ones(n), carrier)
    return normalize(m) if normalized else m


# -- CSV I/O ---------------------------------------------------------------

def load_waveform_csv(path, *, carrier: float = 0.0, rtol: float = 1e-6) -> TemporalMode:
    """Read a ``t,re,im`` CSV (seconds, dimensionless amplitude) into a TemporalMode."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.lstrip().startswith("#")) if r]
    if not rows or [c.strip() for c in rows[0]] != ["t", "re", "im"]:
        raise ValidationError(f"{path}: expected header 't,re,im'")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:]])
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric entry ({exc})") from None
    if data.ndim != 2 or data.shape[1] != 3 or data.shape[0] < 2:
        raise ValidationError(f"{path}: need at least two rows of three columns")
    t = data[:, 0]
    steps = np.diff(t)
    dt = float(steps.mean())
    if dt <= 0 or np.max(np.abs(steps - dt)) > rtol * abs(dt) + 1e-15:
        raise ValidationError(f"{path}: time grid is not uniform and increasing")
    return TemporalMode(float(t[0]), dt, data[:, 1] + 1j * data[:, 2], carrier)


def save_waveform_csv(mode: TemporalMode, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "re", "im"])
        for t, s in zip(mode.times, mode.samples):
            w.writerow([repr(float(t)), repr(float(s.real)), repr(float(s.imag))])
