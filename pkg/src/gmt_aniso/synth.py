"""Ground-truth surface generators with analytic mass and normal oracles.

Every generator produces a weighted point cloud whose weights are quadrature
masses of n-dimensional surface measure: grid cell areas for planes and
graphs, an equal-area lattice for the sphere, parameter cell volume times
sqrt(2) per nappe for the double cone.  Generation is deterministic for a
fixed spec (including its seed), down to the bit.

The closed-form ball masses exposed by `analytic_mass` are the oracles the
test-suite checks density and doubling code against:

  plane          H^n(P ∩ B(X,r)) = omega_n r^n            (X on the plane)
  sphere         H^2(S ∩ B(X,r)) = pi r^2 for r <= 2R     (X on the sphere;
                 a chord-radius-r cap has area exactly pi r^2)
  double cone    H^3(C ∩ B(0,r)) = omega_3 r^3            (each nappe is a
                 Lipschitz graph with area element sqrt(2), and the ball cuts
                 it at parameter radius r/sqrt(2))
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .errors import InputError
from .measure import DiscreteMeasure
from .metric_field import MetricField, SpdMatrix

_GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def unit_ball_volume(n: int) -> float:
    """omega_n, the Lebesgue volume of the unit ball in R^n."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


@dataclass(frozen=True)
class SurfaceSpec:
    """Description of a model surface to sample.

    kind is one of:
      "plane"         n-plane {x_d = 0} sampled on a uniform grid over
                      [-extent, extent]^n; params: dimension (n), extent.
      "sphere"        round 2-sphere of the given radius in R^3; params: radius.
      "kp_cone"       the double cone x4^2 = x1^2+x2^2+x3^2 in R^4, each nappe
                      a graph over the cube [-extent, extent]^3; params: extent,
                      optional inner_radius to cut out a parameter ball around
                      the apex for away-from-apex experiments.
      "holder_graph"  graph over [-extent, extent]^2 of a lacunary sine sum
                      with C^{1,gamma} regularity; params: gamma, amplitude,
                      extent, seed, levels.
      "affine_image"  an inner spec pushed through an invertible matrix (+
                      shift), with hypersurface weights rescaled exactly via
                      the normal-vector area formula.

    density optionally plants a weight profile on top of the uniform surface
    measure; see `_apply_density`.
    """

    kind: str
    count: int
    dimension: int = 2
    extent: float = 1.0
    radius: float = 1.0
    gamma: float = 0.5
    amplitude: float = 0.3
    seed: int = 0
    levels: int = 6
    inner_radius: float = 0.0
    matrix: Optional[np.ndarray] = None
    shift: Optional[np.ndarray] = None
    inner: Optional["SurfaceSpec"] = None
    density: Optional[dict] = None

    def __post_init__(self):
        if self.kind not in ("plane", "sphere", "kp_cone", "holder_graph", "affine_image"):
            raise InputError(f"unknown surface kind {self.kind!r}")
        if self.count < 8:
            raise InputError("count is too small for a meaningful sample")
        if self.kind == "plane" and self.dimension < 1:
            raise InputError("plane dimension must be >= 1")
        if self.kind == "holder_graph":
            if not (0.0 < self.gamma < 1.0):
                raise InputError("gamma must lie in (0, 1)")
            slope = self.amplitude * sum(4.0 ** (-j * self.gamma) for j in range(1, self.levels + 1))
            if slope > 1.0:
                raise InputError(
                    f"amplitude {self.amplitude} gives max slope {slope:.3f} > 1; "
                    "the 45-degree cap keeps graph quadrature weights valid"
                )
        if self.kind == "affine_image":
            if self.inner is None or self.matrix is None:
                raise InputError("affine_image needs an inner spec and a matrix")

    @property
    def ambient_dim(self) -> int:
        if self.kind == "plane":
            return self.dimension + 1
        if self.kind == "sphere":
            return 3
        if self.kind == "kp_cone":
            return 4
        if self.kind == "holder_graph":
            return 3
        return self.inner.ambient_dim

    @property
    def surface_dim(self) -> int:
        if self.kind == "plane":
            return self.dimension
        if self.kind == "sphere":
            return 2
        if self.kind == "kp_cone":
            return 3
        if self.kind == "holder_graph":
            return 2
        return self.inner.surface_dim

    def to_json_dict(self) -> dict:
        out = {"kind": self.kind, "count": self.count}
        if self.kind == "plane":
            out.update(dimension=self.dimension, extent=self.extent)
        elif self.kind == "sphere":
            out.update(radius=self.radius)
        elif self.kind == "kp_cone":
            out.update(extent=self.extent, inner_radius=self.inner_radius)
        elif self.kind == "holder_graph":
            out.update(
                gamma=self.gamma,
                amplitude=self.amplitude,
                extent=self.extent,
                seed=self.seed,
                levels=self.levels,
            )
        elif self.kind == "affine_image":
            out.update(matrix=self.matrix.tolist(), inner=self.inner.to_json_dict())
            if self.shift is not None:
                out["shift"] = self.shift.tolist()
        if self.density is not None:
            out["density"] = self.density
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "SurfaceSpec":
        kw = dict(data)
        kind = kw.pop("kind")
        count = int(kw.pop("count"))
        if kind == "affine_image":
            kw["matrix"] = np.asarray(kw["matrix"], dtype=float)
            if "shift" in kw:
                kw["shift"] = np.asarray(kw["shift"], dtype=float)
            kw["inner"] = cls.from_json_dict(kw["inner"])
        return cls(kind=kind, count=count, **kw)


def _grid_axis(extent: float, m: int, phase: float) -> np.ndarray:
    # cell-centered nodes with an irrational fractional phase; the phase keeps
    # lattice-count errors of ball queries off their resonant worst case
    h = 2.0 * extent / m
    return -extent + (np.arange(m) + 0.5 + phase) * h


def _irrational_phase(i: int) -> float:
    # fractional parts of multiples of the golden ratio, recentered to (-.25, .25)
    return (math.modf((i + 1) * (_GOLDEN - 1.0))[0] - 0.5) * 0.5


def _sample_plane(spec: SurfaceSpec):
    n = spec.dimension
    d = n + 1
    m = max(2, round(spec.count ** (1.0 / n)))
    h = 2.0 * spec.extent / m
    axes = [_grid_axis(spec.extent, m, _irrational_phase(i)) for i in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.zeros((m**n, d))
    for i in range(n):
        pts[:, i] = mesh[i].reshape(-1)
    w = np.full(pts.shape[0], h**n)
    normals = np.zeros_like(pts)
    normals[:, -1] = 1.0
    return pts, w, normals


def _sample_sphere(spec: SurfaceSpec):
    n = spec.count
    r = spec.radius
    k = np.arange(n)
    z = 1.0 - (2.0 * k + 1.0) / n
    phi = 2.0 * math.pi * ((k * (_GOLDEN - 1.0)) % 1.0)
    rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    pts = r * np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    w = np.full(n, 4.0 * math.pi * r * r / n)
    normals = pts / r
    return pts, w, normals


def _sample_kp_cone(spec: SurfaceSpec):
    per_nappe = spec.count // 2
    m = max(3, round(per_nappe ** (1.0 / 3.0)))
    h = 2.0 * spec.extent / m
    axes = [_grid_axis(spec.extent, m, _irrational_phase(i)) for i in range(3)]
    mesh = np.meshgrid(*axes, indexing="ij")
    y = np.stack([a.reshape(-1) for a in mesh], axis=1)
    if spec.inner_radius > 0.0:
        y = y[np.linalg.norm(y, axis=1) >= spec.inner_radius]
        if y.shape[0] == 0:
            raise InputError("inner_radius removed every sample")
    s = np.linalg.norm(y, axis=1)
    pts_list, w_list, n_list = [], [], []
    for sign in (1.0, -1.0):
        p = np.concatenate([y, sign * s[:, None]], axis=1)
        pts_list.append(p)
        w_list.append(np.full(y.shape[0], math.sqrt(2.0) * h**3))
        with np.errstate(invalid="ignore", divide="ignore"):
            u = np.where(s[:, None] > 0, y / np.maximum(s, 1e-300)[:, None], 0.0)
        n_list.append(np.concatenate([-sign * u, np.ones((y.shape[0], 1))], axis=1) / math.sqrt(2.0))
    pts = np.concatenate(pts_list)
    w = np.concatenate(w_list)
    normals = np.concatenate(n_list)
    if spec.inner_radius == 0.0:
        # explicit apex support point carrying the two central parameter cells
        pts = np.concatenate([pts, np.zeros((1, 4))])
        w = np.concatenate([w, [2.0 * math.sqrt(2.0) * h**3]])
        normals = np.concatenate([normals, [[0.0, 0.0, 0.0, 1.0]]])
    return pts, w, normals


def _holder_waves(spec: SurfaceSpec):
    rng = np.random.default_rng(spec.seed)
    freqs, dirs, phases, amps = [], [], [], []
    for j in range(1, spec.levels + 1):
        theta = rng.uniform(0.0, 2.0 * math.pi)
        dirs.append([math.cos(theta), math.sin(theta)])
        phases.append(rng.uniform(0.0, 2.0 * math.pi))
        freqs.append(4.0**j)
        # 4^{-j(1+gamma)} amplitudes make the gradient Holder with exponent gamma
        amps.append(spec.amplitude * 4.0 ** (-j * (1.0 + spec.gamma)))
    return (
        np.asarray(freqs),
        np.asarray(dirs),
        np.asarray(phases),
        np.asarray(amps),
    )


def holder_graph_height(spec: SurfaceSpec, xy: np.ndarray) -> np.ndarray:
    freqs, dirs, phases, amps = _holder_waves(spec)
    args = freqs[None, :] * (xy @ dirs.T) + phases[None, :]
    return np.sin(args) @ amps


def holder_graph_gradient(spec: SurfaceSpec, xy: np.ndarray) -> np.ndarray:
    freqs, dirs, phases, amps = _holder_waves(spec)
    args = freqs[None, :] * (xy @ dirs.T) + phases[None, :]
    coef = np.cos(args) * (amps * freqs)[None, :]
    return coef @ dirs


def _sample_holder_graph(spec: SurfaceSpec):
    m = max(2, round(spec.count**0.5))
    h = 2.0 * spec.extent / m
    axes = [_grid_axis(spec.extent, m, _irrational_phase(i)) for i in range(2)]
    mesh = np.meshgrid(*axes, indexing="ij")
    xy = np.stack([a.reshape(-1) for a in mesh], axis=1)
    z = holder_graph_height(spec, xy)
    grad = holder_graph_gradient(spec, xy)
    area = np.sqrt(1.0 + np.sum(grad * grad, axis=1))
    pts = np.concatenate([xy, z[:, None]], axis=1)
    w = h * h * area
    normals = np.concatenate([-grad, np.ones((xy.shape[0], 1))], axis=1) / area[:, None]
    return pts, w, normals


def _sample_affine_image(spec: SurfaceSpec):
    pts, w, normals = _sample_raw(spec.inner)
    a = np.asarray(spec.matrix, dtype=float)
    d = spec.inner.ambient_dim
    if a.shape != (d, d):
        raise InputError(f"matrix must be {d}x{d}")
    det = np.linalg.det(a)
    if abs(det) < 1e-300:
        raise InputError("matrix must be invertible")
    # hypersurface area scales by |det A| |A^{-T} nu| at a point with unit normal nu
    a_inv_t = np.linalg.inv(a).T
    factor = abs(det) * np.linalg.norm(normals @ a_inv_t.T, axis=1)
    new_pts = pts @ a.T
    if spec.shift is not None:
        new_pts = new_pts + np.asarray(spec.shift, dtype=float)
    new_normals = normals @ a_inv_t.T
    new_normals /= np.linalg.norm(new_normals, axis=1, keepdims=True)
    return new_pts, w * factor, new_normals


def _apply_density(spec: SurfaceSpec, pts: np.ndarray, w: np.ndarray) -> np.ndarray:
    cfg = spec.density
    if cfg is None:
        return w
    kind = cfg["kind"]
    if kind == "constant":
        return w * float(cfg["factor"])
    if kind == "radial_holder":
        # plants |ratio - 1| = amplitude * r^exponent at the given center:
        # the radial weight 1 + A (n+a)/n s^a integrates to that ball defect
        n = spec.surface_dim
        a = float(cfg["exponent"])
        amp = float(cfg["amplitude"])
        center = np.asarray(cfg.get("center", np.zeros(pts.shape[1])), dtype=float)
        s = np.linalg.norm(pts - center, axis=1)
        return w * (1.0 + amp * (n + a) / n * s**a)
    if kind == "sinusoidal":
        amp = float(cfg["amplitude"])
        axis = int(cfg.get("axis", 0))
        freq = float(cfg.get("frequency", 1.0))
        if abs(amp) >= 1.0:
            raise InputError("sinusoidal density amplitude must stay below 1")
        return w * (1.0 + amp * np.sin(freq * pts[:, axis]))
    raise InputError(f"unknown density kind {kind!r}")


def _sample_raw(spec: SurfaceSpec):
    if spec.kind == "plane":
        return _sample_plane(spec)
    if spec.kind == "sphere":
        return _sample_sphere(spec)
    if spec.kind == "kp_cone":
        return _sample_kp_cone(spec)
    if spec.kind == "holder_graph":
        return _sample_holder_graph(spec)
    return _sample_affine_image(spec)


def sample(spec: SurfaceSpec) -> DiscreteMeasure:
    """Sample the surface into a weighted point cloud."""
    pts, w, _ = _sample_raw(spec)
    w = _apply_density(spec, pts, w)
    return DiscreteMeasure.from_points(pts, w)


def sample_with_normals(spec: SurfaceSpec):
    """Sample and also return the oracle unit normals at the sample points."""
    pts, w, normals = _sample_raw(spec)
    w = _apply_density(spec, pts, w)
    return DiscreteMeasure.from_points(pts, w), normals


def analytic_mass(spec: SurfaceSpec, x, r: float) -> Optional[float]:
    """Exact surface mass of B(X, r), when a closed form exists.

    Returns None when the generator has no closed form at this (X, r) or the
    ball is not contained in the sampled extent.
    """
    if r <= 0:
        raise InputError("radius must be positive")
    if spec.density is not None and spec.density.get("kind") != "constant":
        return None
    factor = float(spec.density["factor"]) if spec.density else 1.0
    x = np.asarray(x, dtype=float)
    if spec.kind == "plane":
        n = spec.dimension
        if abs(x[-1]) > 1e-12:
            return None
        if np.any(np.abs(x[:-1]) + r > spec.extent):
            return None
        return factor * unit_ball_volume(n) * r**n
    if spec.kind == "sphere":
        if abs(np.linalg.norm(x) - spec.radius) > 1e-9:
            return None
        if r >= 2.0 * spec.radius:
            return factor * 4.0 * math.pi * spec.radius**2
        # chord-radius-r cap: area pi r^2 exactly
        return factor * math.pi * r * r
    if spec.kind == "kp_cone":
        if np.linalg.norm(x) > 1e-12 or spec.inner_radius > 0.0:
            return None
        if r / math.sqrt(2.0) > spec.extent:
            return None
        return factor * unit_ball_volume(3) * r**3
    return None


def make_field(kind: str, **params) -> MetricField:
    """Convenience constructor for the field kinds used by the generators."""
    if kind == "identity":
        return MetricField(
            kind="identity",
            ambient_dim=int(params["ambient_dim"]),
            holder_exponent=float(params.get("holder_exponent", 0.5)),
        )
    if kind == "constant":
        mat = SpdMatrix.from_entries(params["matrix"])
        return MetricField(
            kind="constant",
            ambient_dim=mat.dim,
            holder_exponent=float(params.get("holder_exponent", 0.5)),
            matrix=mat,
        )
    if kind == "sinusoidal":
        base = SpdMatrix.from_entries(params["base"])
        direction = np.asarray(params.get("direction", np.eye(base.dim)), dtype=float)
        return MetricField(
            kind="sinusoidal",
            ambient_dim=base.dim,
            holder_exponent=float(params.get("holder_exponent", 0.99)),
            matrix=base,
            amplitude=float(params["amplitude"]),
            direction=direction,
            frequency=float(params.get("frequency", 1.0)),
        )
    if kind == "grid":
        return MetricField(
            kind="grid",
            ambient_dim=int(params["ambient_dim"]),
            holder_exponent=float(params.get("holder_exponent", 0.5)),
            grid_origin=np.asarray(params["origin"], dtype=float),
            grid_spacing=float(params["spacing"]),
            grid_shape=tuple(params["shape"]),
            grid_samples=np.asarray(params["samples"], dtype=float),
            grid_interpolation=params.get("interpolation", "multilinear"),
        )
    raise InputError(f"unknown field kind {kind!r}")


def crossing_planes(count: int, extent: float = 1.0) -> DiscreteMeasure:
    """Two orthogonal 2-planes in R^3 crossing along the x-axis.

    The classic non-Reifenberg configuration: every neighborhood of a point on
    the crossing line stays bilaterally far from every plane.
    """
    per = count // 2
    m = max(2, round(per**0.5))
    h = 2.0 * extent / m
    axes = [_grid_axis(extent, m, _irrational_phase(i)) for i in range(2)]
    mesh = np.meshgrid(*axes, indexing="ij")
    uv = np.stack([a.reshape(-1) for a in mesh], axis=1)
    zeros = np.zeros((uv.shape[0], 1))
    horizontal = np.concatenate([uv, zeros], axis=1)
    vertical = np.concatenate([uv[:, :1], zeros, uv[:, 1:]], axis=1)
    pts = np.concatenate([horizontal, vertical])
    w = np.full(pts.shape[0], h * h)
    return DiscreteMeasure.from_points(pts, w)
