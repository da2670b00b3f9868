"""Multiscale flatness coefficients of a discrete measure.

Three graded notions are computed, all scale-normalized to land in [0, 1]:

  beta      centered one-sided flatness: the infimum over planes through X of
            the sup, over support points in B(X, r), of distance to the plane
            over r.  Small beta means the support lies near *some* plane; it
            says nothing about holes.

  bbeta     bilateral flatness: the infimum over planes through X of the
            Hausdorff distance between support and plane inside the ball (or
            inside the metric-field ellipse for the anisotropic variant),
            over r.  Small bbeta at all scales is Reifenberg flatness.

  beta2     a smooth L2 coefficient: the minimum over *affine* planes of a
            kernel-weighted mean-square plane distance; the kernel is a
            C-infinity radial bump sandwiched between the indicators of the
            balls of radii `inner` and `outer`.

The plane infima for beta/bbeta are nonconvex minimax problems; they are
approximated by a weighted-PCA seed refined with Nelder-Mead over a tangent
chart of the unit normal (codimension one), with deterministic restarts.
The beta2 minimum is exact (eigendecomposition of the weighted scatter).

The bilateral distance needs the plane-side set P cap B as an actual set; it
is discretized by an unscrambled Halton ball grid mapped onto the section,
and the achieved resolution is reported next to the value so audits can
tighten it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .errors import DomainError, HypothesisError, InputError
from .measure import DiscreteMeasure, indices_in_ellipse, snap_to_support
from .metric_field import CompactBounds, MetricField

_HALTON_CACHE: dict = {}


def low_discrepancy_ball(count: int, dim: int) -> np.ndarray:
    """Deterministic unscrambled-Halton points in the closed unit ball."""
    key = (count, dim)
    if key not in _HALTON_CACHE:
        sampler = qmc.Halton(d=dim, scramble=False)
        pts = np.empty((0, dim))
        while pts.shape[0] < count:
            block = 2.0 * sampler.random(4 * count) - 1.0
            block = block[np.linalg.norm(block, axis=1) <= 1.0]
            pts = np.concatenate([pts, block])
        pts = pts[:count].copy()
        pts.setflags(write=False)
        _HALTON_CACHE[key] = pts
    return _HALTON_CACHE[key]


@dataclass(frozen=True)
class Plane:
    """Affine n-plane: base point, orthonormal basis rows, unit normal (codim 1)."""

    base: np.ndarray
    basis: np.ndarray
    normal: Optional[np.ndarray] = None

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float)
        basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        gram = basis @ basis.T
        if float(np.max(np.abs(gram - np.eye(basis.shape[0])))) > 1e-10:
            raise InputError("plane basis rows must be orthonormal")
        if self.normal is not None:
            normal = np.asarray(self.normal, dtype=float)
            if abs(float(np.linalg.norm(normal)) - 1.0) > 1e-10:
                raise InputError("plane normal must be a unit vector")
            if float(np.max(np.abs(basis @ normal))) > 1e-10:
                raise InputError("plane normal must be orthogonal to the basis")
            object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "basis", basis)

    @classmethod
    def from_normal(cls, base, normal) -> "Plane":
        normal = np.asarray(normal, dtype=float)
        normal = normal / np.linalg.norm(normal)
        return cls(base=np.asarray(base, dtype=float), basis=_complement_basis(normal).T, normal=normal)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[1]

    def distances(self, pts: np.ndarray) -> np.ndarray:
        """Euclidean distances to the (unbounded) plane."""
        rel = np.atleast_2d(pts) - self.base
        if self.normal is not None and self.dim == self.ambient_dim - 1:
            return np.abs(rel @ self.normal)
        along = rel @ self.basis.T
        return np.linalg.norm(rel - along @ self.basis, axis=1)

    def project(self, pts: np.ndarray) -> np.ndarray:
        rel = np.atleast_2d(pts) - self.base
        return self.base + (rel @ self.basis.T) @ self.basis


def _complement_basis(normal: np.ndarray) -> np.ndarray:
    """Orthonormal (d, d-1) basis of normal's orthogonal complement (columns).

    Householder reflection sending e1 to the normal; deterministic.
    """
    d = normal.shape[0]
    e1 = np.zeros(d)
    e1[0] = 1.0
    v = normal - e1 if normal[0] >= 0 else normal + e1
    nv = np.linalg.norm(v)
    if nv < 1e-14:
        h = np.eye(d)
    else:
        v = v / nv
        h = np.eye(d) - 2.0 * np.outer(v, v)
    cols = h[:, 1:]
    if normal[0] < 0:
        cols = -cols
    return cols


@dataclass(frozen=True)
class KernelSpec:
    """Radially non-increasing C-infinity cutoff: 1 on [0, inner], 0 on [outer, inf).

    The transition uses the standard bump psi(u) = f(u) / (f(u) + f(1-u)) with
    f(u) = exp(-1/u) for u > 0, so chi_{B(0,inner)} <= phi <= chi_{B(0,outer)}.
    """

    inner: float
    outer: float

    def __post_init__(self):
        if not (0.0 < self.inner < self.outer):
            raise InputError("need 0 < inner < outer")

    def phi(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        u = (self.outer - t) / (self.outer - self.inner)
        out = np.where(t <= self.inner, 1.0, np.where(t >= self.outer, 0.0, _psi(np.clip(u, 0.0, 1.0))))
        return out


def _psi(u: np.ndarray) -> np.ndarray:
    def f(v):
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(v > 0.0, np.exp(-1.0 / np.maximum(v, 1e-300)), 0.0)

    fu = f(u)
    f1u = f(1.0 - u)
    return fu / (fu + f1u)


BETA2_KERNEL = KernelSpec(inner=2.0, outer=3.0)
FLAT_FUNCTIONAL_KERNEL = KernelSpec(inner=1.0, outer=2.0)


@dataclass(frozen=True)
class PlaneSearchParams:
    """Knobs of the Nelder-Mead plane search (deterministic for fixed values)."""

    restarts: int = 3
    maxiter: int = 200
    seed: int = 0
    grid_count: int = 1024
    final_grid_count: int = 4096


@dataclass(frozen=True)
class FlatnessProfile:
    center: np.ndarray
    scales: np.ndarray
    beta: np.ndarray
    bbeta: np.ndarray
    bbeta_aniso: np.ndarray
    beta2: np.ndarray
    gamma_fit: float
    resolution: float

    def to_json_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "scales": self.scales.tolist(),
            "beta": self.beta.tolist(),
            "bbeta": self.bbeta.tolist(),
            "bbeta_aniso": self.bbeta_aniso.tolist(),
            "beta2": self.beta2.tolist(),
            "gamma_fit": self.gamma_fit,
            "resolution": self.resolution,
        }


def hausdorff_distance(a, b) -> float:
    """Hausdorff distance between two finite point sets."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise DomainError("Hausdorff distance needs two non-empty sets")
    d_ab = np.max(cKDTree(b).query(a)[0])
    d_ba = np.max(cKDTree(a).query(b)[0])
    return float(max(d_ab, d_ba))


def fit_plane_weighted(
    mu: DiscreteMeasure,
    x,
    r: float,
    kernel: KernelSpec = BETA2_KERNEL,
    through_center: bool = False,
    n: Optional[int] = None,
) -> Plane:
    """Kernel-weighted least-squares plane at scale r.

    Minimizes sum_i w_i phi(|p_i - X|/r) dist(p_i, P)^2 over affine n-planes
    (or planes through X when through_center), exactly, via the top-n
    eigenvectors of the weighted scatter about the weighted centroid (resp.
    about X).
    """
    if r <= 0:
        raise InputError("radius must be positive")
    x = np.asarray(x, dtype=float)
    d = mu.dim
    if n is None:
        n = d - 1
    if not (1 <= n < d):
        raise InputError(f"plane dimension must be in [1, {d - 1}]")
    cand = mu.index.query_ball_point(x, kernel.outer * r)
    cand = np.asarray(cand, dtype=int)
    if cand.size == 0:
        raise DomainError("no support point receives positive kernel weight")
    pts = mu.points[cand]
    weights = mu.weights[cand] * kernel.phi(np.linalg.norm(pts - x, axis=1) / r)
    pos = weights > 0
    pts, weights = pts[pos], weights[pos]
    if pts.shape[0] < n + 1:
        raise DomainError(f"only {pts.shape[0]} points carry kernel weight; need at least {n + 1}")
    if through_center:
        origin = x
    else:
        origin = (weights[:, None] * pts).sum(axis=0) / weights.sum()
    rel = pts - origin
    scatter = (weights[:, None] * rel).T @ rel
    lam, vec = np.linalg.eigh(scatter)
    if lam[d - n] <= 1e-12 * max(float(np.trace(scatter)), 1e-300):
        raise DomainError("degenerate configuration: weighted scatter is rank deficient")
    basis = vec[:, d - n :].T
    normal = vec[:, 0] if n == d - 1 else None
    return Plane(base=origin, basis=basis, normal=normal)


class _PlaneSection:
    """The slice of a plane by a Euclidean ball or metric-field ellipse.

    Works in the plane's intrinsic coordinates t (rows of `basis`): the slice
    is the ellipsoid (t - t0)' M (t - t0) <= rho^2.  Provides exact distances
    from ambient points and a deterministic covering grid.
    """

    def __init__(self, plane: Plane, center: np.ndarray, r: float, a_inv: Optional[np.ndarray]):
        self.plane = plane
        n, d = plane.basis.shape
        b_t = plane.basis.T
        if a_inv is None:
            g = b_t
            c = plane.base - center
        else:
            g = a_inv @ b_t
            c = a_inv @ (plane.base - center)
        m = g.T @ g
        q = g.T @ c
        lam, u = np.linalg.eigh(m)
        if lam[0] <= 1e-14 * max(lam[-1], 1e-300):
            raise DomainError("plane section is degenerate")
        t0 = -u @ ((u.T @ q) / lam)
        rho2 = r * r - float(c @ c) + float(q @ t0) * -1.0
        # rho2 = r^2 - |c|^2 + q' M^{-1} q; note q' t0 = -q' M^{-1} q
        self.empty = rho2 <= 0.0
        self.t0 = t0
        self.eigvals = lam
        self.eigvecs = u
        self.rho = math.sqrt(max(rho2, 0.0))

    def dist_from_points(self, pts: np.ndarray) -> np.ndarray:
        if self.empty:
            raise DomainError("empty plane section")
        rel = np.atleast_2d(pts) - self.plane.base
        t = rel @ self.plane.basis.T
        perp2 = np.maximum(np.sum(rel * rel, axis=1) - np.sum(t * t, axis=1), 0.0)
        z = (t - self.t0) @ self.eigvecs
        d_in = _dist_to_axis_ellipsoid(z, self.rho / np.sqrt(self.eigvals))
        return np.sqrt(perp2 + d_in * d_in)

    def grid(self, count: int) -> np.ndarray:
        if self.empty:
            raise DomainError("empty plane section")
        n = self.plane.basis.shape[0]
        u = low_discrepancy_ball(count, n)
        half = self.eigvecs @ np.diag(self.rho / np.sqrt(self.eigvals)) @ self.eigvecs.T
        t = self.t0 + u @ half.T
        return self.plane.base + t @ self.plane.basis

    def grid_resolution(self, count: int) -> float:
        """Covering-radius estimate of the grid inside the section."""
        n = self.plane.basis.shape[0]
        axes = self.rho / np.sqrt(self.eigvals)
        vol = float(np.prod(axes)) * math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)
        return 1.6 * (vol / max(count, 1)) ** (1.0 / n)


def _dist_to_axis_ellipsoid(z: np.ndarray, axes: np.ndarray) -> np.ndarray:
    """Distance from points z to the solid axis-aligned ellipsoid sum (z_i/a_i)^2 <= 1."""
    z = np.atleast_2d(z)
    if np.allclose(axes, axes[0]):
        return np.maximum(0.0, np.linalg.norm(z, axis=1) - axes[0])
    inside = np.sum((z / axes) ** 2, axis=1) <= 1.0
    out = np.zeros(z.shape[0])
    if np.all(inside):
        return out
    zo = z[~inside]
    az = axes * zo
    lo = np.zeros(zo.shape[0])
    hi = np.max(np.abs(az), axis=1) * math.sqrt(z.shape[1]) + 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        g = np.sum((az / (axes**2 + mid[:, None])) ** 2, axis=1)
        high = g > 1.0
        lo = np.where(high, mid, lo)
        hi = np.where(high, hi, mid)
    lam = 0.5 * (lo + hi)
    y = zo * (axes**2) / (axes**2 + lam[:, None])
    out[~inside] = np.linalg.norm(zo - y, axis=1)
    return out


def _pca_seed_normal(rel: np.ndarray, weights: np.ndarray) -> np.ndarray:
    scatter = (weights[:, None] * rel).T @ rel
    lam, vec = np.linalg.eigh(scatter)
    return vec[:, 0]


def _search_normal(objective, seed_normal: np.ndarray, params: PlaneSearchParams):
    """Nelder-Mead over the tangent chart normal(t) = unit(n0 + V t)."""
    d = seed_normal.shape[0]
    v = _complement_basis(seed_normal)

    def from_chart(t):
        raw = seed_normal + v @ t
        return raw / np.linalg.norm(raw)

    def fun(t):
        return objective(from_chart(t))

    rng = np.random.default_rng(params.seed)
    starts = [np.zeros(d - 1)]
    for _ in range(max(0, params.restarts - 1)):
        starts.append(rng.normal(scale=0.7, size=d - 1))
    best_t, best_val = None, np.inf
    for t0 in starts:
        res = minimize(
            fun,
            t0,
            method="Nelder-Mead",
            options={"maxiter": params.maxiter, "xatol": 1e-4, "fatol": 1e-7},
        )
        if res.fun < best_val:
            best_val, best_t = float(res.fun), res.x
    return from_chart(best_t), best_val


def beta_centered(
    mu: DiscreteMeasure,
    x,
    r: float,
    search: PlaneSearchParams = PlaneSearchParams(),
    snap_tol: float = 1e-9,
) -> float:
    """Centered one-sided flatness: inf over planes through X of sup dist / r."""
    if r <= 0:
        raise InputError("radius must be positive")
    center = snap_to_support(mu, x, snap_tol)
    idx = mu.indices_in_ball(center, r)
    if idx.size == 0:
        raise DomainError("empty ball")
    rel = mu.points[idx] - center
    weights = mu.weights[idx]

    def objective(normal):
        return float(np.max(np.abs(rel @ normal))) / r

    seed = _pca_seed_normal(rel, weights)
    _, val = _search_normal(objective, seed, search)
    return min(val, 1.0)


def _bilateral_given_normal(
    rel: np.ndarray,
    member_tree: cKDTree,
    center: np.ndarray,
    r: float,
    a_inv: Optional[np.ndarray],
    normal: np.ndarray,
    grid_count: int,
) -> float:
    plane = Plane.from_normal(center, normal)
    section = _PlaneSection(plane, center, r, a_inv)
    side1 = float(np.max(section.dist_from_points(center + rel)))
    grid = section.grid(grid_count)
    side2 = float(np.max(member_tree.query(grid)[0]))
    return max(side1, side2)


def bbeta(
    mu: DiscreteMeasure,
    x,
    r: float,
    field: Optional[MetricField] = None,
    search: PlaneSearchParams = PlaneSearchParams(),
    snap_tol: float = 1e-9,
) -> float:
    """Bilateral flatness: inf over planes through X of D[support, plane] / r.

    Both sets are cut to the ball B(X, r), or to the ellipse B_L(X, r) when a
    field is supplied.  The support side uses exact point-to-section
    distances; the plane side is a Halton grid queried against the support.
    """
    if r <= 0:
        raise InputError("radius must be positive")
    center = snap_to_support(mu, x, snap_tol)
    if field is not None and field.kind != "identity":
        idx = indices_in_ellipse(mu, field, center, r)
        a_inv = field.eval(center).inverse()
    else:
        idx = mu.indices_in_ball(center, r)
        a_inv = None
    if idx.size == 0:
        raise DomainError("empty ball")
    pts = mu.points[idx]
    rel = pts - center
    weights = mu.weights[idx]
    member_tree = cKDTree(pts)

    def objective(normal):
        return (
            _bilateral_given_normal(rel, member_tree, center, r, a_inv, normal, search.grid_count)
            / r
        )

    seed = _pca_seed_normal(rel, weights)
    normal, _ = _search_normal(objective, seed, search)
    final = (
        _bilateral_given_normal(rel, member_tree, center, r, a_inv, normal, search.final_grid_count)
        / r
    )
    return min(final, 1.0)


def beta2_smooth(
    mu: DiscreteMeasure,
    x,
    r: float,
    n: int,
    kernel: KernelSpec = BETA2_KERNEL,
) -> float:
    """Smooth L2 flatness at scale r (kernel sandwiched between 2r and 3r balls).

    The minimizing plane ranges over all affine n-planes and is computed
    exactly from the weighted scatter spectrum.
    """
    if r <= 0:
        raise InputError("radius must be positive")
    x = np.asarray(x, dtype=float)
    d = mu.dim
    cand = np.asarray(mu.index.query_ball_point(x, kernel.outer * r), dtype=int)
    if cand.size == 0:
        raise DomainError("no kernel mass at this center and scale")
    pts = mu.points[cand]
    weights = mu.weights[cand] * kernel.phi(np.linalg.norm(pts - x, axis=1) / r)
    pos = weights > 0
    pts, weights = pts[pos], weights[pos]
    if pts.shape[0] == 0:
        raise DomainError("no kernel mass at this center and scale")
    if pts.shape[0] <= n:
        # too few points to pin a plane; the best plane interpolates them
        return 0.0
    centroid = (weights[:, None] * pts).sum(axis=0) / weights.sum()
    rel = pts - centroid
    scatter = (weights[:, None] * rel).T @ rel
    lam = np.linalg.eigvalsh(scatter)
    residual = float(np.sum(lam[: d - n]))
    return math.sqrt(max(residual, 0.0) / r ** (n + 2))


@dataclass(frozen=True)
class ImplicationRecord:
    hypothesis_met: bool
    conclusion_holds: bool
    lhs: float
    hypothesis_bound: float
    conclusion_lhs: float
    conclusion_bound: float

    @property
    def passes(self) -> bool:
        return (not self.hypothesis_met) or self.conclusion_holds


@dataclass(frozen=True)
class ComparisonRecord:
    r: float
    r_outer: float
    r_inner: float
    delta: float
    d_euclid_outer: float
    d_ellipse: float
    d_euclid_inner: float
    euclid_to_elliptic: ImplicationRecord
    elliptic_to_euclid: ImplicationRecord
    resolution: float


def bilateral_distance(
    mu: DiscreteMeasure,
    x,
    r: float,
    plane: Plane,
    field: Optional[MetricField] = None,
    grid_count: int = 4096,
) -> tuple[float, float]:
    """D[support cut to the ball/ellipse at (X, r); plane cut the same way].

    Returns (distance, plane-grid resolution).  The support side is exact;
    the plane side can miss holes narrower than the reported resolution.
    """
    x = np.asarray(x, dtype=float)
    if field is not None and field.kind != "identity":
        idx = indices_in_ellipse(mu, field, x, r)
        a_inv = field.eval(x).inverse()
    else:
        idx = mu.indices_in_ball(x, r)
        a_inv = None
    if idx.size == 0:
        raise DomainError("support does not meet the ball")
    pts = mu.points[idx]
    section = _PlaneSection(plane, x, r, a_inv)
    if section.empty:
        raise DomainError("plane does not meet the ball")
    side1 = float(np.max(section.dist_from_points(pts)))
    grid = section.grid(grid_count)
    side2 = float(np.max(cKDTree(pts).query(grid)[0]))
    return max(side1, side2), section.grid_resolution(grid_count)


def flatness_comparison_check(
    field: MetricField,
    mu: DiscreteMeasure,
    x,
    r: float,
    plane: Plane,
    delta: float,
    bounds: CompactBounds,
    grid_count: int = 4096,
) -> ComparisonRecord:
    """Check the two implications comparing Euclidean and elliptic flatness.

    With r' = lambda_max_K r and r'' = lambda_min_K r:
      (1) D[Sigma, P inside B(X, r')] <= delta r'
            implies D[Sigma, P inside B_L(X, r)] <= (2 + ecc) delta r';
      (2) D[Sigma, P inside B_L(X, r)] <= delta r
            implies D[Sigma, P inside B(X, r'')] <= 2 delta r.
    delta must stay below delta_K = min(lambda_min_K, 1/ecc).
    """
    if delta >= bounds.delta_K:
        raise HypothesisError(f"delta={delta} is not below delta_K={bounds.delta_K}")
    if float(plane.distances(np.asarray(x, dtype=float)[None, :])[0]) > 1e-9:
        raise InputError("the comparison plane must pass through X")
    r_outer = bounds.lambda_max_K * r
    r_inner = bounds.lambda_min_K * r
    d_out, res1 = bilateral_distance(mu, x, r_outer, plane, None, grid_count)
    d_ell, res2 = bilateral_distance(mu, x, r, plane, field, grid_count)
    d_in, res3 = bilateral_distance(mu, x, r_inner, plane, None, grid_count)
    imp1 = ImplicationRecord(
        hypothesis_met=d_out <= delta * r_outer,
        conclusion_holds=d_ell <= (2.0 + bounds.eccentricity) * delta * r_outer,
        lhs=d_out,
        hypothesis_bound=delta * r_outer,
        conclusion_lhs=d_ell,
        conclusion_bound=(2.0 + bounds.eccentricity) * delta * r_outer,
    )
    imp2 = ImplicationRecord(
        hypothesis_met=d_ell <= delta * r,
        conclusion_holds=d_in <= 2.0 * delta * r,
        lhs=d_ell,
        hypothesis_bound=delta * r,
        conclusion_lhs=d_in,
        conclusion_bound=2.0 * delta * r,
    )
    return ComparisonRecord(
        r=r,
        r_outer=r_outer,
        r_inner=r_inner,
        delta=delta,
        d_euclid_outer=d_out,
        d_ellipse=d_ell,
        d_euclid_inner=d_in,
        euclid_to_elliptic=imp1,
        elliptic_to_euclid=imp2,
        resolution=max(res1, res2, res3),
    )


def decay_fit(profile: FlatnessProfile) -> tuple[float, float]:
    """Slope and multiplier of log beta against log r."""
    return fit_decay(profile.scales, profile.beta)


def fit_decay(scales: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    scales = np.asarray(scales, dtype=float)
    values = np.asarray(values, dtype=float)
    usable = values > 1e-12
    if np.count_nonzero(usable) < 3:
        raise DomainError("need at least 3 scales with nonzero coefficient to fit a decay")
    slope, intercept = np.polyfit(np.log(scales[usable]), np.log(values[usable]), 1)
    return float(slope), float(np.exp(intercept))


def flatness_profile(
    mu: DiscreteMeasure,
    x,
    scales: Sequence[float],
    n: int,
    field: Optional[MetricField] = None,
    search: PlaneSearchParams = PlaneSearchParams(),
    snap_tol: float = 1e-9,
) -> FlatnessProfile:
    """beta, bbeta, anisotropic bbeta and beta2 across a scale ladder.

    beta is clamped below bbeta's achieved plane so the one-sided coefficient
    never exceeds the bilateral one by search slack alone.
    """
    center = snap_to_support(mu, x, snap_tol)
    scales = np.asarray(sorted(scales, reverse=True), dtype=float)
    betas, bbetas, bbetas_a, beta2s = [], [], [], []
    resolution = 0.0
    for r in scales:
        idx = mu.indices_in_ball(center, r)
        if idx.size == 0:
            raise DomainError(f"empty ball at scale {r}")
        rel = mu.points[idx] - center
        tree = cKDTree(mu.points[idx])
        weights = mu.weights[idx]
        seed = _pca_seed_normal(rel, weights)

        def one_sided(normal):
            return float(np.max(np.abs(rel @ normal))) / r

        def bilateral(normal):
            return _bilateral_given_normal(rel, tree, center, r, None, normal, search.grid_count) / r

        beta_normal, beta_val = _search_normal(one_sided, seed, search)
        bb_normal, _ = _search_normal(bilateral, seed, search)
        bb_val = (
            _bilateral_given_normal(rel, tree, center, r, None, bb_normal, search.final_grid_count)
            / r
        )
        beta_val = min(beta_val, one_sided(bb_normal), 1.0)
        bb_val = min(bb_val, 1.0)
        betas.append(beta_val)
        bbetas.append(bb_val)
        resolution = max(
            resolution,
            _PlaneSection(Plane.from_normal(center, bb_normal), center, r, None).grid_resolution(
                search.final_grid_count
            )
            / r,
        )
        if field is not None:
            bbetas_a.append(bbeta(mu, center, r, field=field, search=search, snap_tol=snap_tol))
        else:
            bbetas_a.append(float("nan"))
        beta2s.append(beta2_smooth(mu, center, r, n))
    try:
        gamma, _ = fit_decay(scales, np.asarray(betas))
    except DomainError:
        gamma = float("nan")
    return FlatnessProfile(
        center=center,
        scales=scales,
        beta=np.asarray(betas),
        bbeta=np.asarray(bbetas),
        bbeta_aniso=np.asarray(bbetas_a),
        beta2=np.asarray(beta2s),
        gamma_fit=gamma,
        resolution=resolution,
    )
