"""Density ratios, doubling defects, the dyadic density and its normalization.

The density ratio of a measure at center X and scale r is
mu(B_L(X,r)) / (omega_n r^n); a Holder density defect means |ratio - 1| decays
like C r^alpha, and that exponent is what `density_profile` fits.  Doubling
defects compare mu(B_L(X,tr)) / mu(B_L(X,r)) with t^n.  The dyadic density
follows the sequence D_k at radii 2^{-k}, whose logs are Cauchy under a
Holder doubling hypothesis; its finite-k value normalizes the measure in
`normalize_by_density`.

Centers are snapped to the nearest support point (tolerance 1e-9) so the
"X on the support" precondition holds literally for discrete data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError, InputError
from .measure import DiscreteMeasure, ellipse_mass, farthest_point_indices, snap_to_support
from .metric_field import MetricField
from .synth import unit_ball_volume

_FIT_FLOOR = 1e-12


@dataclass(frozen=True)
class DensityProfile:
    """Per-scale density ratios at one center, with a fitted defect law.

    fitted_alpha / fitted_C come from least squares of log|ratio - 1| against
    log r, over the scales where |ratio - 1| exceeds 1e-12 (scales below that
    carry no defect information and would blow up the log).
    """

    center: np.ndarray
    scales: np.ndarray
    ratios: np.ndarray
    fitted_alpha: float
    fitted_C: float

    def to_json_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "scales": self.scales.tolist(),
            "ratios": self.ratios.tolist(),
            "fitted_alpha": self.fitted_alpha,
            "fitted_C": self.fitted_C,
        }


@dataclass(frozen=True)
class DoublingDefect:
    center: np.ndarray
    r: float
    t_grid: np.ndarray
    defects: np.ndarray
    sup_defect: float


def _loglog_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares slope and multiplier of y ~ C x^alpha."""
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(np.exp(intercept))


def density_profile(
    mu: DiscreteMeasure,
    field: MetricField,
    x,
    scales: Sequence[float],
    n: int,
    snap_tol: float = 1e-9,
) -> DensityProfile:
    """Density ratios mu(B_L(X,r)) / (omega_n r^n) over a descending scale ladder."""
    center = snap_to_support(mu, x, snap_tol)
    scales = np.asarray(sorted(scales, reverse=True), dtype=float)
    if np.any(scales <= 0):
        raise InputError("all scales must be positive")
    omega = unit_ball_volume(n)
    ratios = np.empty_like(scales)
    for i, r in enumerate(scales):
        mass = ellipse_mass(mu, field, center, r)
        if mass <= 0:
            raise DomainError(
                f"zero mass at scale {r}: center {center.tolist()} is not in the numerical support"
            )
        ratios[i] = mass / (omega * r**n)
    defect = np.abs(ratios - 1.0)
    usable = defect > _FIT_FLOOR
    if np.count_nonzero(usable) >= 2:
        alpha, c = _loglog_fit(scales[usable], defect[usable])
    else:
        alpha, c = float("nan"), 0.0
    return DensityProfile(center=center, scales=scales, ratios=ratios, fitted_alpha=alpha, fitted_C=c)


def doubling_defect(
    mu: DiscreteMeasure,
    field: MetricField,
    x,
    r: float,
    t_grid: Sequence[float],
    n: int,
    snap_tol: float = 1e-9,
) -> DoublingDefect:
    """Defects |mu(B_L(X,tr)) / mu(B_L(X,r)) - t^n| over a grid of t in (0,1].

    The grid must reach into [1/2, 1], the range the doubling hypothesis
    quantifies over; smaller t values are admissible extensions.
    """
    center = snap_to_support(mu, x, snap_tol)
    t = np.asarray(sorted(t_grid), dtype=float)
    if np.any(t <= 0) or np.any(t > 1):
        raise InputError("t_grid must lie in (0, 1]")
    if not np.any(t >= 0.5):
        raise InputError("t_grid must include samples in [1/2, 1]")
    denom = ellipse_mass(mu, field, center, r)
    if denom <= 0:
        raise DomainError(f"zero mass in the radius-{r} ellipse at {center.tolist()}")
    defects = np.empty_like(t)
    for i, ti in enumerate(t):
        defects[i] = abs(ellipse_mass(mu, field, center, ti * r) / denom - ti**n)
    return DoublingDefect(center=center, r=r, t_grid=t, defects=defects, sup_defect=float(np.max(defects)))


def theta_lambda(
    mu: DiscreteMeasure,
    field: MetricField,
    x,
    n: int,
    k_range: tuple[int, int] = (3, 7),
    snap_tol: float = 1e-9,
) -> tuple[float, np.ndarray]:
    """Dyadic density estimate at X: D_k at radii 2^{-k} and theta = D_{k_max}.

    Returns (theta, l_sequence) where l_k = log D_k; the sequence lets callers
    audit the Cauchy rate |l_{k+1} - l_k| that a Holder doubling bound implies.
    """
    center = snap_to_support(mu, x, snap_tol)
    k_lo, k_hi = int(k_range[0]), int(k_range[1])
    if k_hi < k_lo:
        raise InputError("k_range must be nondecreasing")
    omega = unit_ball_volume(n)
    l_seq = []
    for k in range(k_lo, k_hi + 1):
        r = 2.0**-k
        mass = ellipse_mass(mu, field, center, r)
        if mass <= 0:
            raise DomainError(f"zero mass at dyadic level k={k} (r={r}) for center {center.tolist()}")
        l_seq.append(np.log(mass / (omega * r**n)))
    l_seq = np.asarray(l_seq)
    return float(np.exp(l_seq[-1])), l_seq


def normalize_by_density(
    mu: DiscreteMeasure,
    field: MetricField,
    n: int,
    k_range: tuple[int, int] = (3, 7),
    eval_count: int = 256,
    snap_tol: float = 1e-9,
) -> DiscreteMeasure:
    """Divide every weight by a local dyadic-density estimate.

    Theta is evaluated at a deterministic farthest-point subsample of the
    support and propagated to the remaining points by nearest neighbor; the
    support set is unchanged, only weights move.
    """
    idx = farthest_point_indices(mu.points, min(eval_count, mu.size))
    thetas = np.empty(idx.size)
    failures = []
    for j, i in enumerate(idx):
        try:
            thetas[j], _ = theta_lambda(mu, field, mu.points[i], n, k_range, snap_tol)
        except DomainError as exc:
            failures.append((i, str(exc)))
            thetas[j] = np.nan
    if failures:
        listing = "; ".join(f"point {i}: {msg}" for i, msg in failures[:5])
        raise DomainError(f"theta evaluation failed at {len(failures)} points ({listing})")
    tree = cKDTree(mu.points[idx])
    _, nearest = tree.query(mu.points)
    return DiscreteMeasure.from_points(mu.points, mu.weights / thetas[nearest])


def log_theta_pairs(
    mu: DiscreteMeasure,
    field: MetricField,
    n: int,
    centers: np.ndarray,
    k_range: tuple[int, int] = (3, 7),
    max_pair_distance: Optional[float] = None,
) -> list[dict]:
    """Diagnostic table of |log theta(X) - log theta(Y)| against |X - Y|.

    The log-Holder continuity of the dyadic density holds below a
    non-constructive pair-distance threshold, so this never asserts; callers
    cap the pair distance themselves and inspect the ratios.
    """
    centers = np.asarray(centers, dtype=float)
    vals = [theta_lambda(mu, field, c, n, k_range)[0] for c in centers]
    rows = []
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            dist = float(np.linalg.norm(centers[i] - centers[j]))
            if max_pair_distance is not None and dist > max_pair_distance:
                continue
            rows.append(
                {
                    "distance": dist,
                    "log_theta_gap": abs(float(np.log(vals[i]) - np.log(vals[j]))),
                }
            )
    return rows
