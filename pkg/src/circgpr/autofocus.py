"""Host-medium permittivity selection for migration.

Two sweep criteria are provided: a structural-similarity score against a ring
mask built from the known defect boundary (maximized), and an image-entropy
focus measure (minimized). A travel-time-weighted RMS permittivity of the
layer stack serves as the physical reference both are judged against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve, distance_transform_edt

from .constants import C0
from .errors import ParameterError, ShapeError
from .fdtd import BScan
from .migrate import Contour, MigratedImage, MigrationParams, kirchhoff_migrate
from .scene import GridSpec

_SOBEL_X = np.array([[-1.0, 0.0, 1.0],
                     [-2.0, 0.0, 2.0],
                     [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T


@dataclass(frozen=True)
class SweepSpec:
    """Candidate permittivity grid for the autofocus sweep."""

    eps_min: float = 2.5
    eps_max: float = 10.0
    step: float = 0.5

    def __post_init__(self):
        if self.eps_min < 1.0:
            raise ParameterError("eps_min must be >= 1")
        if self.step <= 0.0:
            raise ParameterError("sweep step must be > 0")
        if self.eps_max < self.eps_min:
            raise ParameterError("eps_max must be >= eps_min")

    def values(self) -> np.ndarray:
        n = int(np.floor((self.eps_max - self.eps_min) / self.step + 1e-9)) + 1
        return self.eps_min + self.step * np.arange(n)


@dataclass(frozen=True)
class SsimParams:
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0

    def __post_init__(self):
        if self.k1 <= 0 or self.k2 <= 0:
            raise ParameterError("k1 and k2 must be > 0")


@dataclass(frozen=True)
class LayerStack:
    """(eps, thickness) pairs from the outer surface toward the defect."""

    layers: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.layers) == 0:
            raise ParameterError("layer stack must be non-empty")
        for eps, thickness in self.layers:
            if eps < 1.0:
                raise ParameterError("layer eps must be >= 1")
            if thickness <= 0.0:
                raise ParameterError("layer thickness must be > 0")


@dataclass
class AftResult:
    eps_selected: float
    score_curve: list[tuple[float, float]]
    image: MigratedImage

    def curve_dict(self) -> dict:
        return {"eps": [e for e, _ in self.score_curve],
                "score": [s for _, s in self.score_curve],
                "eps_selected": self.eps_selected}


# ---------------------------------------------------------------------------
# Ring mask construction
# ---------------------------------------------------------------------------

def sobel_edges(mask: np.ndarray) -> np.ndarray:
    """Binary edge map: 3x3 Sobel gradient magnitude thresholded at > 0.

    The one-pixel border, where the kernels would read zero padding, is
    reported as zero so that a constant mask yields no edges.
    """
    m = np.asarray(mask, dtype=np.float64)
    gx = convolve(m, _SOBEL_X, mode="constant", cval=0.0)
    gy = convolve(m, _SOBEL_Y, mode="constant", cval=0.0)
    mag = np.hypot(gx, gy)
    mag[0, :] = mag[-1, :] = 0.0
    mag[:, 0] = mag[:, -1] = 0.0
    return (mag > 0.0).astype(np.float64)


def ring_mask(edges: np.ndarray, thickness_px: int = 5) -> np.ndarray:
    """Euclidean dilation of an edge map: 1 where distance to an edge pixel
    <= thickness_px."""
    if thickness_px < 1:
        raise ParameterError("ring thickness must be >= 1 px")
    e = np.asarray(edges) > 0
    if not e.any():
        raise ParameterError("ring_mask needs a non-empty edge map")
    dist = distance_transform_edt(~e)
    return (dist <= thickness_px).astype(np.float64)


def defect_ring_mask(defect_mask: np.ndarray, thickness_px: int = 5) -> np.ndarray:
    """Ring mask straight from a defect region mask."""
    return ring_mask(sobel_edges(defect_mask), thickness_px)


# ---------------------------------------------------------------------------
# Scores
# ---------------------------------------------------------------------------

def ssim_global(a: np.ndarray, b: np.ndarray, p: SsimParams = SsimParams()) -> float:
    """Single-window SSIM from whole-image means, variances and covariance."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"ssim_global shapes differ: {a.shape} vs {b.shape}")
    c1 = (p.k1 * p.dynamic_range) ** 2
    c2 = (p.k2 * p.dynamic_range) ** 2
    mu_a, mu_b = a.mean(), b.mean()
    var_a, var_b = a.var(), b.var()
    cov = ((a - mu_a) * (b - mu_b)).mean()
    return float(((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                 / ((mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)))


def image_entropy(img: np.ndarray) -> float:
    """Shannon entropy of the squared-magnitude pixel distribution."""
    e = np.asarray(img, dtype=np.float64) ** 2
    total = e.sum()
    if total <= 0.0:
        raise ParameterError("image_entropy needs a non-zero image")
    pmf = (e / total).ravel()
    nz = pmf[pmf > 0.0]
    return float(-(nz * np.log(nz)).sum())


def _normalized_magnitude(image: MigratedImage) -> np.ndarray:
    mag = np.abs(image.intensity)
    peak = mag.max()
    return mag / peak if peak > 0 else mag


# ---------------------------------------------------------------------------
# Autofocus sweeps
# ---------------------------------------------------------------------------

def _sweep(g: BScan, contour: Contour, image_spec: GridSpec,
           sweep: SweepSpec) -> list[tuple[float, MigratedImage]]:
    eps_values = sweep.values()
    if len(eps_values) == 0:
        raise ParameterError("empty autofocus sweep")
    out = []
    for eps in eps_values:
        params = MigrationParams(eps_medium=float(eps), image_spec=image_spec)
        out.append((float(eps), kirchhoff_migrate(g, contour, params)))
    return out


def ssim_aft(g: BScan, contour: Contour, ring: np.ndarray, sweep: SweepSpec,
             image_spec: GridSpec, p: SsimParams = SsimParams()) -> AftResult:
    """Sweep the medium permittivity and keep the migration whose normalized
    magnitude is most similar to the defect ring mask (ties -> smaller eps)."""
    if ring.shape != (image_spec.nx, image_spec.ny):
        raise ShapeError("ring mask must match the imaging window")
    candidates = _sweep(g, contour, image_spec, sweep)
    curve = []
    for eps, image in candidates:
        curve.append((eps, ssim_global(_normalized_magnitude(image), ring, p)))
    best = max(range(len(curve)), key=lambda i: (curve[i][1], -curve[i][0]))
    return AftResult(eps_selected=curve[best][0], score_curve=curve,
                     image=candidates[best][1])


def entropy_aft(g: BScan, contour: Contour, sweep: SweepSpec,
                image_spec: GridSpec) -> AftResult:
    """Sweep the medium permittivity and keep the most concentrated image
    (minimum entropy of the normalized magnitude; ties -> smaller eps)."""
    candidates = _sweep(g, contour, image_spec, sweep)
    curve = []
    for eps, image in candidates:
        curve.append((eps, image_entropy(_normalized_magnitude(image))))
    best = min(range(len(curve)), key=lambda i: (curve[i][1], curve[i][0]))
    return AftResult(eps_selected=curve[best][0], score_curve=curve,
                     image=candidates[best][1])


# ---------------------------------------------------------------------------
# RMS-equivalent permittivity
# ---------------------------------------------------------------------------

def rms_permittivity(stack: LayerStack) -> float:
    """Travel-time-weighted RMS of the layer velocities, as a permittivity.

    v_i = c/sqrt(eps_i), t_i = 2 d_i sqrt(eps_i) / c (two-way),
    v_rms^2 = sum(v_i^2 t_i) / sum(t_i); returns c^2 / v_rms^2.
    """
    v2t = 0.0
    t_total = 0.0
    for eps, thickness in stack.layers:
        v = C0 / np.sqrt(eps)
        t = 2.0 * thickness * np.sqrt(eps) / C0
        v2t += v * v * t
        t_total += t
    v_rms_sq = v2t / t_total
    return float(C0 * C0 / v_rms_sq)
