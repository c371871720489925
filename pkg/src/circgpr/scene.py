"""Layered cylindrical scenes with star-convex blob geometry.

A scene is an outer blob outline with three concentric layers (layers 1 and 2
are constant-thickness bands measured along the inward normal, layer 3 fills
the remainder) and a single blob-shaped defect inside layer 3. Scenes sample
deterministically from a seed and rasterize to material grids for the FDTD
solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.spatial import cKDTree

from .errors import GeometryError, ParameterError, SamplingError

_BOUNDARY_SAMPLES = 720  # polyline density used for distance-to-outline queries


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlobShape:
    """Star-convex outline r(theta) = base_radius * (1 + sum a_k cos(k theta + phi_k)).

    Harmonics are (order, amplitude, phase) triples with order >= 2 and
    sum |amplitude| <= 0.3, which keeps the radius positive and the shape
    star-convex about ``center``.
    """

    base_radius: float
    harmonics: tuple[tuple[int, float, float], ...] = ()
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.base_radius <= 0:
            raise ParameterError("blob base_radius must be > 0")
        amp_sum = sum(abs(a) for _, a, _ in self.harmonics)
        if amp_sum > 0.3 + 1e-12:
            raise ParameterError(f"blob harmonic amplitudes sum to {amp_sum:.3f} > 0.3")
        for k, _, _ in self.harmonics:
            if k < 2:
                raise ParameterError("blob harmonic order must be >= 2")

    @property
    def max_radius(self) -> float:
        return self.base_radius * (1.0 + sum(abs(a) for _, a, _ in self.harmonics))

    @property
    def min_radius(self) -> float:
        return self.base_radius * (1.0 - sum(abs(a) for _, a, _ in self.harmonics))


@dataclass(frozen=True)
class Scene:
    """One layered cylindrical object with an internal defect."""

    outer_shape: BlobShape
    layer_thicknesses: tuple[float, float]           # layers 1 and 2 [m]
    layer_eps: tuple[float, float, float]            # relative permittivity
    layer_sigma: tuple[float, float, float]          # conductivity [S/m]
    defect_shape: BlobShape
    defect_eps: float
    defect_sigma: float
    seed: int

    def __post_init__(self):
        if any(e < 1.0 for e in self.layer_eps) or self.defect_eps < 1.0:
            raise ParameterError("relative permittivity must be >= 1")
        if any(s < 0.0 for s in self.layer_sigma) or self.defect_sigma < 0.0:
            raise ParameterError("conductivity must be >= 0")
        if any(t <= 0.0 for t in self.layer_thicknesses):
            raise ParameterError("layer thicknesses must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "Scene":
        def blob(b):
            return BlobShape(
                base_radius=b["base_radius"],
                harmonics=tuple((int(k), float(a), float(p)) for k, a, p in b["harmonics"]),
                center=tuple(b["center"]),
            )

        return Scene(
            outer_shape=blob(d["outer_shape"]),
            layer_thicknesses=tuple(d["layer_thicknesses"]),
            layer_eps=tuple(d["layer_eps"]),
            layer_sigma=tuple(d["layer_sigma"]),
            defect_shape=blob(d["defect_shape"]),
            defect_eps=float(d["defect_eps"]),
            defect_sigma=float(d["defect_sigma"]),
            seed=int(d["seed"]),
        )


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell grid. ``origin`` is the center of cell (0, 0); the point of
    cell (ix, iy) is origin + spacing * (ix, iy)."""

    origin: tuple[float, float]
    spacing: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.spacing <= 0:
            raise ParameterError("grid spacing must be > 0")
        if self.nx < 1 or self.ny < 1:
            raise ParameterError("grid dims must be >= 1")

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (X, Y) coordinate arrays of shape (nx, ny)."""
        x = self.origin[0] + self.spacing * np.arange(self.nx)
        y = self.origin[1] + self.spacing * np.arange(self.ny)
        return np.meshgrid(x, y, indexing="ij")

    def to_dict(self) -> dict:
        return {"origin": list(self.origin), "spacing": self.spacing,
                "nx": self.nx, "ny": self.ny}

    @staticmethod
    def from_dict(d: dict) -> "GridSpec":
        return GridSpec(origin=tuple(d["origin"]), spacing=float(d["spacing"]),
                        nx=int(d["nx"]), ny=int(d["ny"]))


@dataclass
class MaterialGrid:
    """Relative permittivity and conductivity sampled on a GridSpec."""

    spec: GridSpec
    eps_r: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        want = (self.spec.nx, self.spec.ny)
        if self.eps_r.shape != want or self.sigma.shape != want:
            raise ParameterError(f"material arrays must have shape {want}")
        if self.eps_r.min() < 1.0:
            raise ParameterError("eps_r must be >= 1 everywhere")
        if self.sigma.min() < 0.0:
            raise ParameterError("sigma must be >= 0 everywhere")


@dataclass(frozen=True)
class SceneRanges:
    """Sampling ranges for random scenes. Defaults mirror the synthetic dataset
    protocol: object radius [0.15, 0.33] m, defect radius [0.04, 0.23] m,
    layer bands [1, 2] / [1, 3] cm, layer eps/sigma [2,3]/[0.01,0.03],
    [23,25]/[0.1,0.3], [4,5]/[0.01,0.03], defect eps [5, 40]."""

    object_radius: tuple[float, float] = (0.15, 0.33)
    defect_radius: tuple[float, float] = (0.04, 0.23)
    t1: tuple[float, float] = (0.01, 0.02)
    t2: tuple[float, float] = (0.01, 0.03)
    eps1: tuple[float, float] = (2.0, 3.0)
    sigma1: tuple[float, float] = (0.01, 0.03)
    eps2: tuple[float, float] = (23.0, 25.0)
    sigma2: tuple[float, float] = (0.1, 0.3)
    eps3: tuple[float, float] = (4.0, 5.0)
    sigma3: tuple[float, float] = (0.01, 0.03)
    defect_eps: tuple[float, float] = (5.0, 40.0)
    defect_sigma: tuple[float, float] = (0.01, 0.03)
    # per-order harmonic amplitude bound for orders 2..5 (4 * 0.075 = 0.3 total)
    outer_harmonic_amp: tuple[float, float] = (0.0, 0.075)
    defect_harmonic_amp: tuple[float, float] = (0.0, 0.075)
    clearance: float = 0.01

    def validate(self) -> None:
        for name, value in vars(self).items():
            if isinstance(value, tuple):
                lo, hi = value
                if lo > hi:
                    raise ParameterError(f"range {name} is degenerate: {lo} > {hi}")

    @staticmethod
    def from_dict(d: dict) -> "SceneRanges":
        kwargs = {}
        for key, val in d.items():
            kwargs[key] = tuple(val) if isinstance(val, (list, tuple)) else val
        return SceneRanges(**kwargs)


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------

def blob_radius(shape: BlobShape, theta) -> np.ndarray | float:
    """Radius of the blob outline at polar angle ``theta`` (2*pi periodic)."""
    theta = np.asarray(theta, dtype=np.float64)
    r = np.ones_like(theta)
    for k, a, phi in shape.harmonics:
        r = r + a * np.cos(k * theta + phi)
    out = shape.base_radius * r
    return float(out) if out.ndim == 0 else out


def boundary_points(shape: BlobShape, n: int = _BOUNDARY_SAMPLES) -> np.ndarray:
    """(n, 2) points on the blob boundary, evenly spaced in angle."""
    theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    r = blob_radius(shape, theta)
    cx, cy = shape.center
    return np.column_stack([cx + r * np.cos(theta), cy + r * np.sin(theta)])


def contains(shape: BlobShape, x, y) -> np.ndarray:
    """Vectorized point-in-blob test (star-convex: radial comparison)."""
    dx = np.asarray(x, dtype=np.float64) - shape.center[0]
    dy = np.asarray(y, dtype=np.float64) - shape.center[1]
    theta = np.arctan2(dy, dx)
    return np.hypot(dx, dy) <= blob_radius(shape, theta)


def inward_normals(shape: BlobShape, theta: np.ndarray) -> np.ndarray:
    """Unit normals of the outline pointing toward the interior, shape (n, 2).

    For r(theta) the outward normal direction is (r, -dr/dtheta) expressed in
    the local (radial, tangential) frame.
    """
    theta = np.asarray(theta, dtype=np.float64)
    r = blob_radius(shape, theta)
    dr = np.zeros_like(theta)
    for k, a, phi in shape.harmonics:
        dr += -shape.base_radius * a * k * np.sin(k * theta + phi)
    e_r = np.column_stack([np.cos(theta), np.sin(theta)])
    e_t = np.column_stack([-np.sin(theta), np.cos(theta)])
    outward = r[:, None] * e_r - dr[:, None] * e_t
    outward /= np.linalg.norm(outward, axis=1, keepdims=True)
    return -outward


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def _sample_blob(rng: np.random.Generator, base_radius: float,
                 amp_range: tuple[float, float],
                 center: tuple[float, float]) -> BlobShape:
    harmonics = []
    for order in (2, 3, 4, 5):
        amp = rng.uniform(*amp_range)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        if amp > 0.0:
            harmonics.append((order, float(amp), float(phase)))
    return BlobShape(base_radius=base_radius, harmonics=tuple(harmonics), center=center)


def _defect_fits(defect: BlobShape, outer: BlobShape, inner_depth: float,
                 clearance: float, n_check: int = 360) -> bool:
    """True when every defect boundary point is >= inner_depth + clearance
    inside the outer outline (normal-offset layer convention)."""
    pts = boundary_points(defect, n_check)
    # inside the outer shape at all?
    if not np.all(contains(outer, pts[:, 0], pts[:, 1])):
        return False
    outline = boundary_points(outer, _BOUNDARY_SAMPLES)
    tree = cKDTree(outline)
    dist, _ = tree.query(pts)
    return bool(np.all(dist >= inner_depth + clearance))


def sample_scene(seed: int, ranges: SceneRanges | None = None,
                 max_attempts: int = 1000) -> Scene:
    """Draw one random scene deterministically from ``seed``.

    Raises SamplingError (naming the seed) when no defect placement satisfying
    the clearance invariant is found within ``max_attempts``.
    """
    ranges = ranges or SceneRanges()
    ranges.validate()
    rng = np.random.default_rng(seed)

    outer_r = rng.uniform(*ranges.object_radius)
    outer = _sample_blob(rng, outer_r, ranges.outer_harmonic_amp, (0.0, 0.0))

    t1 = rng.uniform(*ranges.t1)
    t2 = rng.uniform(*ranges.t2)
    eps = (rng.uniform(*ranges.eps1), rng.uniform(*ranges.eps2), rng.uniform(*ranges.eps3))
    sigma = (rng.uniform(*ranges.sigma1), rng.uniform(*ranges.sigma2), rng.uniform(*ranges.sigma3))
    defect_eps = rng.uniform(*ranges.defect_eps)
    defect_sigma = rng.uniform(*ranges.defect_sigma)

    inner_depth = t1 + t2
    # radius budget of the layer-3 region along its tightest direction
    room = outer.min_radius - inner_depth - ranges.clearance
    if room <= 1e-3:
        raise SamplingError(f"seed {seed}: layer 3 region too small for any defect")

    target_r = rng.uniform(*ranges.defect_radius)
    for _ in range(max_attempts):
        amp_sum = 0.3 if ranges.defect_harmonic_amp[1] > 0 else 0.0
        # clip the base radius so a centered defect could fit, then randomize
        base_r = min(target_r, 0.95 * room / (1.0 + amp_sum))
        rho_max = max(room - base_r * (1.0 + amp_sum), 0.0)
        rho = rho_max * np.sqrt(rng.uniform())  # uniform over the feasible disk
        ang = rng.uniform(0.0, 2.0 * np.pi)
        center = (float(rho * np.cos(ang)), float(rho * np.sin(ang)))
        defect = _sample_blob(rng, base_r, ranges.defect_harmonic_amp, center)
        if _defect_fits(defect, outer, inner_depth, ranges.clearance):
            return Scene(
                outer_shape=outer,
                layer_thicknesses=(float(t1), float(t2)),
                layer_eps=tuple(float(e) for e in eps),
                layer_sigma=tuple(float(s) for s in sigma),
                defect_shape=defect,
                defect_eps=float(defect_eps),
                defect_sigma=float(defect_sigma),
                seed=int(seed),
            )
    raise SamplingError(f"seed {seed}: no defect placement found in {max_attempts} attempts")


# ---------------------------------------------------------------------------
# Rasterization
# ---------------------------------------------------------------------------

def _classify(scene: Scene, X: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Innermost-region material at the given points (defect > layer 3 >
    layer 2 > layer 1 > free space)."""
    outer = scene.outer_shape
    eps = np.ones(X.shape, dtype=np.float64)
    sig = np.zeros(X.shape, dtype=np.float64)

    inside = contains(outer, X, Y)
    outline = boundary_points(outer, _BOUNDARY_SAMPLES)
    tree = cKDTree(outline)
    pts = np.column_stack([X[inside], Y[inside]])
    depth = tree.query(pts)[0] if len(pts) else np.zeros(0)

    t1, t2 = scene.layer_thicknesses
    lab = np.zeros(len(pts), dtype=np.int8)  # 0 -> layer1
    lab[depth >= t1] = 1
    lab[depth >= t1 + t2] = 2

    eps_in = np.choose(lab, scene.layer_eps)
    sig_in = np.choose(lab, scene.layer_sigma)

    in_defect = contains(scene.defect_shape, pts[:, 0], pts[:, 1])
    eps_in[in_defect] = scene.defect_eps
    sig_in[in_defect] = scene.defect_sigma

    eps[inside] = eps_in
    sig[inside] = sig_in
    return eps, sig


def rasterize(scene: Scene, spec: GridSpec, supersample: int = 1) -> MaterialGrid:
    """Fill the material arrays over the grid window.

    With supersample=1 each cell takes the material of its center (innermost
    containing region wins). supersample=k averages a k x k subgrid per cell,
    which suppresses staircase scattering in the FDTD path; the arithmetic
    mean is the consistent mixing rule for the out-of-plane field.
    """
    outer = scene.outer_shape
    cx, cy = outer.center
    x_lo = spec.origin[0]
    x_hi = spec.origin[0] + spec.spacing * (spec.nx - 1)
    y_lo = spec.origin[1]
    y_hi = spec.origin[1] + spec.spacing * (spec.ny - 1)
    r_max = outer.max_radius
    if not (x_lo <= cx - r_max and x_hi >= cx + r_max
            and y_lo <= cy - r_max and y_hi >= cy + r_max):
        raise GeometryError("grid window does not cover the scene outline")

    if supersample <= 1:
        X, Y = spec.cell_centers()
        eps, sig = _classify(scene, X, Y)
        return MaterialGrid(spec=spec, eps_r=eps, sigma=sig)

    k = int(supersample)
    offsets = (np.arange(k) - (k - 1) / 2.0) * (spec.spacing / k)
    eps = np.zeros((spec.nx, spec.ny))
    sig = np.zeros((spec.nx, spec.ny))
    X, Y = spec.cell_centers()
    for ox in offsets:
        for oy in offsets:
            e, s = _classify(scene, X + ox, Y + oy)
            eps += e
            sig += s
    eps /= k * k
    sig /= k * k
    return MaterialGrid(spec=spec, eps_r=eps, sigma=sig)


def defect_mask(scene: Scene, image_spec: GridSpec) -> np.ndarray:
    """Ground-truth mask: 1.0 inside the defect outline, 0.0 elsewhere."""
    X, Y = image_spec.cell_centers()
    return contains(scene.defect_shape, X, Y).astype(np.float32)


def image_window(scene: Scene, n: int = 128, pad: float = 1.05) -> GridSpec:
    """Square n x n imaging window centered on the object, covering the
    outline with a small margin."""
    half = scene.outer_shape.max_radius * pad
    cx, cy = scene.outer_shape.center
    spacing = 2.0 * half / (n - 1)
    return GridSpec(origin=(cx - half, cy - half), spacing=spacing, nx=n, ny=n)
