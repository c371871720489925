"""Kirchhoff migration over the closed object contour.

Reflections in a time-zeroed B-scan are mapped into the cross-section window
under the exploding-source model: each image point at distance R from a
contour point contributes the trace value at delay R/v, where v is half the
in-medium wave speed. The kernel combines a near-field 1/R^2 term with a
far-field derivative term, weighted by the obliquity cosine and the local
arc length, and scaled by the minimum range to balance shallow points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import C0
from .errors import GeometryError, ParameterError, ShapeError
from .fdtd import AScan, BScan
from .scene import BlobShape, GridSpec, blob_radius, inward_normals


@dataclass
class Contour:
    """Discretized object outline: one surface point per B-scan trace."""

    points: np.ndarray    # (n, 2) [m]
    normals: np.ndarray   # (n, 2) unit vectors, pointing inward
    ds: np.ndarray        # (n,) arc-length weights [m]

    def __post_init__(self):
        n = len(self.points)
        if self.normals.shape != (n, 2) or self.ds.shape != (n,):
            raise ShapeError("contour arrays must share one length")
        norms = np.linalg.norm(self.normals, axis=1)
        if np.abs(norms - 1.0).max() > 1e-9:
            raise ParameterError("contour normals must be unit length")

    @property
    def total_length(self) -> float:
        return float(self.ds.sum())


@dataclass(frozen=True)
class MigrationParams:
    eps_medium: float
    image_spec: GridSpec

    def __post_init__(self):
        if self.eps_medium < 1.0:
            raise ParameterError("eps_medium must be >= 1")


@dataclass
class MigratedImage:
    spec: GridSpec
    intensity: np.ndarray
    eps_medium_used: float

    def __post_init__(self):
        if self.intensity.shape != (self.spec.nx, self.spec.ny):
            raise ShapeError("intensity shape must match the grid spec")
        if not np.all(np.isfinite(self.intensity)):
            raise ParameterError("migrated intensity must be finite")


# ---------------------------------------------------------------------------
# Pieces
# ---------------------------------------------------------------------------

def velocity_from_permittivity(eps: float) -> float:
    """Migration velocity: half of c / sqrt(eps) (one-way exploding-source)."""
    if eps < 1.0:
        raise ParameterError("relative permittivity must be >= 1")
    return (C0 / np.sqrt(eps)) / 2.0


def contour_from_scan(b: BScan, scene_outline: BlobShape) -> Contour:
    """Project each scan position radially onto the outline surface."""
    center = np.asarray(scene_outline.center)
    rel = b.trace_positions - center[None, :]
    dist = np.linalg.norm(rel, axis=1)
    theta = np.arctan2(rel[:, 1], rel[:, 0])
    r_surface = blob_radius(scene_outline, theta)
    if np.any(dist <= r_surface):
        bad = int(np.argmax(dist <= r_surface))
        raise GeometryError(f"scan position {bad} lies inside the outline")
    points = center[None, :] + r_surface[:, None] * np.column_stack(
        [np.cos(theta), np.sin(theta)])
    normals = inward_normals(scene_outline, theta)
    chord_prev = np.linalg.norm(points - np.roll(points, 1, axis=0), axis=1)
    chord_next = np.linalg.norm(np.roll(points, -1, axis=0) - points, axis=1)
    ds = 0.5 * (chord_prev + chord_next)
    return Contour(points=points, normals=normals, ds=ds)


def time_derivative(b: BScan) -> BScan:
    """d/dt of each trace: central differences inside, one-sided at the ends."""
    if b.n_samples < 3:
        raise ShapeError("time_derivative needs at least 3 samples")
    tr = b.traces
    out = np.empty_like(tr)
    out[:, 1:-1] = (tr[:, 2:] - tr[:, :-2]) / (2.0 * b.dt)
    out[:, 0] = (tr[:, 1] - tr[:, 0]) / b.dt
    out[:, -1] = (tr[:, -1] - tr[:, -2]) / b.dt
    res = b.copy()
    res.traces = out
    return res


def sample_trace(trace: AScan, t: float) -> float:
    """Linear interpolation on the trace's local axis; 0 outside [0, record]."""
    n = len(trace.samples)
    x = t / trace.dt
    if x < 0.0 or x > n - 1:
        return 0.0
    i = int(x)
    if i >= n - 1:
        return float(trace.samples[n - 1])
    frac = x - i
    return float(trace.samples[i] * (1.0 - frac) + trace.samples[i + 1] * frac)


def _interp_rows(traces: np.ndarray, row_idx: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Vectorized per-row linear interpolation; 0 outside the record."""
    n = traces.shape[1]
    valid = (x >= 0.0) & (x <= n - 1)
    xc = np.clip(x, 0.0, n - 1 - 1e-12)
    i0 = xc.astype(np.int64)
    frac = xc - i0
    v = traces[row_idx, i0] * (1.0 - frac) + traces[row_idx, np.minimum(i0 + 1, n - 1)] * frac
    return np.where(valid, v, 0.0)


def _inside_contour(contour: Contour, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Containment against the contour polygon (star-shaped about its centroid)."""
    cx, cy = contour.points.mean(axis=0)
    ang = np.arctan2(contour.points[:, 1] - cy, contour.points[:, 0] - cx)
    rad = np.linalg.norm(contour.points - [cx, cy], axis=1)
    order = np.argsort(ang)
    ang_s, rad_s = ang[order], rad[order]
    # periodic wrap for interpolation
    ang_ext = np.concatenate([ang_s - 2 * np.pi, ang_s, ang_s + 2 * np.pi])
    rad_ext = np.concatenate([rad_s, rad_s, rad_s])
    pang = np.arctan2(Y - cy, X - cx)
    r_bound = np.interp(pang, ang_ext, rad_ext)
    return np.hypot(X - cx, Y - cy) <= r_bound


# ---------------------------------------------------------------------------
# Migration
# ---------------------------------------------------------------------------

def kirchhoff_migrate(g: BScan, contour: Contour, params: MigrationParams) -> MigratedImage:
    """Migrate a processed, time-zeroed B-scan into the imaging window.

    For each pixel inside the contour polygon:

        I = (R_min / 2 pi) * sum_i obl_i * (G_i(R_i/v)/R_i^2
                                            - G'_i(R_i/v)/(v R_i)) * ds_i

    with R_i the pixel-to-contour distances, obl_i the inward-normal cosine
    and v from the configured medium permittivity. Pixels closer than two
    cells to the contour are zeroed (1/R^2 singularity guard), as are pixels
    outside the outline.
    """
    if len(contour.points) != g.n_traces:
        raise ShapeError(
            f"contour has {len(contour.points)} points for {g.n_traces} traces")

    spec = params.image_spec
    v = velocity_from_permittivity(params.eps_medium)
    gp = time_derivative(g)

    X, Y = spec.cell_centers()
    inside = _inside_contour(contour, X, Y)
    pix = np.column_stack([X[inside], Y[inside]])
    intensity = np.zeros((spec.nx, spec.ny))
    if len(pix) == 0:
        return MigratedImage(spec=spec, intensity=intensity,
                             eps_medium_used=params.eps_medium)

    diff = pix[:, None, :] - contour.points[None, :, :]      # (npix, nc, 2)
    dist = np.linalg.norm(diff, axis=2)                       # (npix, nc)
    np.maximum(dist, 1e-12, out=dist)
    obliquity = np.einsum("pnk,nk->pn", diff, contour.normals) / dist

    nc = len(contour.points)
    rows = np.broadcast_to(np.arange(nc)[None, :], dist.shape)
    x = dist / (v * g.dt)
    g_vals = _interp_rows(g.traces, rows, x)
    gp_vals = _interp_rows(gp.traces, rows, x)

    kernel = obliquity * (g_vals / dist**2 - gp_vals / (v * dist)) * contour.ds[None, :]
    r_min = dist.min(axis=1)
    vals = (r_min / (2.0 * np.pi)) * kernel.sum(axis=1)
    vals[r_min < 2.0 * spec.spacing] = 0.0

    intensity[inside] = vals
    return MigratedImage(spec=spec, intensity=intensity,
                         eps_medium_used=params.eps_medium)
