"""B-scan conditioning: coupling removal, band-pass, SVD clutter suppression,
time zeroing, normalization and resizing.

Two processing paths are used downstream: the permittivity-estimation input
(coupling removal + band-pass + time zero + resize) and the migration input
(coupling removal + band-pass + time zero + rank-k SVD removal).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import filtfilt, firwin

from .errors import ParameterError, ShapeError
from .fdtd import AScan, BScan


@dataclass(frozen=True)
class NormStats:
    """Global min/max used for [0, 1] normalization across a dataset."""

    global_min: float
    global_max: float

    def __post_init__(self):
        if not self.global_max > self.global_min:
            raise ParameterError("NormStats requires global_max > global_min")


@dataclass(frozen=True)
class PreprocessProfile:
    """Which conditioning steps each consumer gets."""

    name: str = "default"
    network_coupling_removal: bool = True
    network_bandpass: bool = True
    network_time_zero: bool = True
    network_resize_128: bool = True
    migration_coupling_removal: bool = True
    migration_bandpass: bool = True
    migration_time_zero: bool = True
    migration_svd_k: int = 1

    def __post_init__(self):
        if self.migration_svd_k < 0:
            raise ParameterError("svd rank k must be >= 0")

    @staticmethod
    def from_dict(d: dict) -> "PreprocessProfile":
        return PreprocessProfile(**d)


# ---------------------------------------------------------------------------
# Trace-domain operations
# ---------------------------------------------------------------------------

def coupling_removal(b: BScan, reference: AScan) -> BScan:
    """Subtract the direct-coupling reference trace from every trace."""
    if abs(reference.dt - b.dt) > 1e-15:
        raise ShapeError(f"reference dt {reference.dt} != b-scan dt {b.dt}")
    if len(reference.samples) != b.n_samples:
        raise ShapeError(
            f"reference length {len(reference.samples)} != n_samples {b.n_samples}")
    out = b.copy()
    out.traces = b.traces - reference.samples[None, :]
    return out


def svd_clutter_removal(b: BScan, k: int) -> BScan:
    """Drop the k largest singular components (b minus its best rank-k part)."""
    if k < 0 or k >= min(b.n_traces, b.n_samples):
        if k == 0:
            return b.copy()
        raise ParameterError(f"svd rank k={k} must satisfy 0 <= k < min(traces, samples)")
    if k == 0:
        return b.copy()
    u, s, vt = np.linalg.svd(b.traces, full_matrices=False)
    clutter = (u[:, :k] * s[:k]) @ vt[:k, :]
    out = b.copy()
    out.traces = b.traces - clutter
    return out


def bandpass_fir(b: BScan, f_lo: float = 0.7e9, f_hi: float = 2.3e9,
                 taps: int = 101, beta: float = 6.0) -> BScan:
    """Zero-phase Kaiser-window FIR band-pass, applied forward-backward."""
    nyq = 0.5 / b.dt
    if not (0.0 < f_lo < f_hi < nyq):
        raise ParameterError(
            f"band [{f_lo:.3g}, {f_hi:.3g}] Hz must lie inside (0, {nyq:.3g}) Hz")
    if taps % 2 == 0:
        raise ParameterError("taps must be odd")
    coeff = firwin(taps, [f_lo, f_hi], window=("kaiser", beta),
                   pass_zero=False, fs=1.0 / b.dt)
    # edge-extend by hand: records can be shorter than scipy's default pad,
    # and transient traces end near zero anyway
    padded = np.pad(b.traces, ((0, 0), (taps, taps)), mode="edge")
    filtered = filtfilt(coeff, [1.0], padded, axis=1, padtype=None)
    out = b.copy()
    out.traces = filtered[:, taps:-taps]
    return out


def time_zero(b: BScan, reference: AScan, threshold_frac: float = 0.05) -> BScan:
    """Align t = 0 with the reference's first |sample| above threshold_frac * max.

    Traces shift by whole samples (leading samples dropped, zero-padded at the
    end); ``t0_offset`` records the absolute time now sitting at sample 0, so
    re-applying with the same reference is a no-op.
    """
    if not (0.0 < threshold_frac < 1.0):
        raise ParameterError("threshold_frac must be in (0, 1)")
    mag = np.abs(reference.samples)
    peak = mag.max()
    if peak <= 0.0:
        raise ParameterError("time_zero reference never crosses the threshold")
    crossing = np.nonzero(mag > threshold_frac * peak)[0]
    if len(crossing) == 0:
        raise ParameterError("time_zero reference never crosses the threshold")
    t_star = reference.t0_offset + crossing[0] * reference.dt

    shift = int(round((t_star - b.t0_offset) / b.dt))
    out = b.copy()
    if shift > 0:
        out.traces = np.zeros_like(b.traces)
        out.traces[:, : b.n_samples - shift] = b.traces[:, shift:]
    elif shift < 0:
        out.traces = np.zeros_like(b.traces)
        out.traces[:, -shift:] = b.traces[:, :shift]
    out.t0_offset = b.t0_offset + shift * b.dt
    return out


def surface_reference(t_surface: float, dt: float, n_samples: int) -> AScan:
    """Impulse marker at the analytic outer-surface echo time, for time_zero."""
    samples = np.zeros(n_samples)
    idx = int(round(t_surface / dt))
    if not (0 <= idx < n_samples):
        raise ParameterError(f"surface time {t_surface:.3e} s outside the record")
    samples[idx] = 1.0
    return AScan(samples=samples, dt=dt)


# ---------------------------------------------------------------------------
# Image-domain utilities
# ---------------------------------------------------------------------------

def normalize01(x: np.ndarray, stats: NormStats) -> np.ndarray:
    """(x - min) / (max - min), clipped into [0, 1]."""
    span = stats.global_max - stats.global_min
    return np.clip((np.asarray(x, dtype=np.float64) - stats.global_min) / span, 0.0, 1.0)


def log_minmax(v: float, v_min: float, v_max: float) -> float:
    """Log-scale min-max map: (ln v - ln v_min) / (ln v_max - ln v_min)."""
    if v_min <= 0 or v <= 0 or v_max <= 0:
        raise ParameterError("log_minmax requires positive values")
    if not (v_min <= v <= v_max) or v_min >= v_max:
        raise ParameterError(f"log_minmax needs v_min <= v <= v_max, got {v_min}, {v}, {v_max}")
    return (np.log(v) - np.log(v_min)) / (np.log(v_max) - np.log(v_min))


def log_minmax_inverse(u: float, v_min: float, v_max: float) -> float:
    """Inverse of log_minmax."""
    return float(np.exp(np.log(v_min) + u * (np.log(v_max) - np.log(v_min))))


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resampling of a 2-D array."""
    a = np.asarray(img, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise ShapeError("resize_bilinear needs a non-empty 2-D array")
    in_h, in_w = a.shape

    def axis_coords(n_out, n_in):
        if n_out == 1 or n_in == 1:
            return np.zeros(n_out)
        return np.arange(n_out) * (n_in - 1) / (n_out - 1)

    ys = axis_coords(out_h, in_h)
    xs = axis_coords(out_w, in_w)
    y0 = np.minimum(np.floor(ys).astype(int), in_h - 1)
    x0 = np.minimum(np.floor(xs).astype(int), in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    top = a[np.ix_(y0, x0)] * (1 - wx) + a[np.ix_(y0, x1)] * wx
    bot = a[np.ix_(y1, x0)] * (1 - wx) + a[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bot * wy


# ---------------------------------------------------------------------------
# Named pipelines
# ---------------------------------------------------------------------------

def for_network(b: BScan, reference: AScan, profile: PreprocessProfile,
                zero_reference: AScan | None = None) -> np.ndarray:
    """Conditioned 128x128 array for permittivity estimation."""
    out = b
    if profile.network_coupling_removal:
        out = coupling_removal(out, reference)
    if profile.network_bandpass:
        out = bandpass_fir(out)
    if profile.network_time_zero and zero_reference is not None:
        out = time_zero(out, zero_reference)
    arr = out.traces
    if profile.network_resize_128:
        arr = resize_bilinear(arr, 128, 128)
    return arr


def for_migration(b: BScan, reference: AScan, profile: PreprocessProfile,
                  zero_reference: AScan | None = None) -> BScan:
    """Conditioned B-scan for Kirchhoff migration."""
    out = b
    if profile.migration_coupling_removal:
        out = coupling_removal(out, reference)
    if profile.migration_bandpass:
        out = bandpass_fir(out)
    if profile.migration_svd_k > 0:
        out = svd_clutter_removal(out, profile.migration_svd_k)
    if profile.migration_time_zero and zero_reference is not None:
        out = time_zero(out, zero_reference)
    return out
