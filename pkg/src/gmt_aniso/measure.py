"""Weighted point clouds standing in for Radon measures.

A DiscreteMeasure is a fixed set of points with strictly positive weights
(quadrature masses of surface measure on a sampled set) plus a kd-tree for
exact range queries.  All ball and ellipse masses use the open-ball
convention: boundary points are excluded, matching the open balls of the
density and flatness definitions.

Measures are immutable; transforms allocate new measures.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError, InputError
from .metric_field import MetricField


@dataclass(frozen=True)
class DiscreteMeasure:
    points: np.ndarray
    weights: np.ndarray
    index: cKDTree
    total_mass: float

    @classmethod
    def from_points(cls, points, weights) -> "DiscreteMeasure":
        pts = np.ascontiguousarray(points, dtype=float)
        w = np.ascontiguousarray(weights, dtype=float)
        if pts.ndim != 2:
            raise InputError("points must be an (N, d) array")
        if w.shape != (pts.shape[0],):
            raise InputError("weights must be a length-N vector")
        if pts.shape[0] == 0:
            raise InputError("a measure needs at least one point")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise InputError("points and weights must be finite")
        if np.any(w <= 0):
            raise InputError("all weights must be strictly positive")
        pts.setflags(write=False)
        w.setflags(write=False)
        # balanced_tree=True gives median splits; queries are exact.
        tree = cKDTree(pts, balanced_tree=True)
        return cls(points=pts, weights=w, index=tree, total_mass=float(np.sum(w)))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def indices_in_ball(self, x, r: float) -> np.ndarray:
        """Indices of points with |p - X| < r (strict), in increasing index order."""
        if r <= 0:
            raise InputError("radius must be positive")
        x = np.asarray(x, dtype=float)
        cand = self.index.query_ball_point(x, r)
        if not cand:
            return np.empty(0, dtype=int)
        cand = np.asarray(sorted(cand), dtype=int)
        d = np.linalg.norm(self.points[cand] - x, axis=1)
        return cand[d < r]

    def nearest_point_index(self, x) -> int:
        _, idx = self.index.query(np.asarray(x, dtype=float))
        return int(idx)


def ball_mass(mu: DiscreteMeasure, x, r: float) -> float:
    """Mass of the open Euclidean ball B(X, r)."""
    idx = mu.indices_in_ball(x, r)
    return float(np.sum(mu.weights[idx]))


def ellipse_mass(mu: DiscreteMeasure, field: MetricField, x, r: float) -> float:
    """Mass of the open ellipse X + L(X)B(0, r).

    The kd-tree is queried with the circumscribed Euclidean radius
    lambda_max(X) * r and candidates are filtered exactly.
    """
    if r <= 0:
        raise InputError("radius must be positive")
    x = np.asarray(x, dtype=float)
    mat = field.eval(x)
    if field.kind == "identity":
        return ball_mass(mu, x, r)
    cand = mu.index.query_ball_point(x, mat.lambda_max * r)
    if not cand:
        return 0.0
    cand = np.asarray(cand, dtype=int)
    w = np.linalg.norm((mu.points[cand] - x) @ mat.inverse().T, axis=1)
    return float(np.sum(mu.weights[cand][w < r]))


def indices_in_ellipse(mu: DiscreteMeasure, field: MetricField, x, r: float) -> np.ndarray:
    """Indices of support points strictly inside the ellipse B_L(X, r)."""
    if r <= 0:
        raise InputError("radius must be positive")
    x = np.asarray(x, dtype=float)
    mat = field.eval(x)
    cand = mu.index.query_ball_point(x, mat.lambda_max * r)
    if not cand:
        return np.empty(0, dtype=int)
    cand = np.asarray(sorted(cand), dtype=int)
    w = np.linalg.norm((mu.points[cand] - x) @ mat.inverse().T, axis=1)
    return cand[w < r]


def pushforward_affine(mu: DiscreteMeasure, a, shift, mass_scale: float = 1.0) -> DiscreteMeasure:
    """Push the measure forward through p -> A p + shift, scaling weights.

    A must be invertible so the transform is a measure isomorphism; the
    kd-tree is rebuilt on the mapped points.
    """
    a = np.asarray(a, dtype=float)
    shift = np.asarray(shift, dtype=float)
    if mass_scale <= 0:
        raise InputError("mass_scale must be positive")
    if a.shape != (mu.dim, mu.dim):
        raise InputError(f"matrix must be {mu.dim}x{mu.dim}")
    det = np.linalg.det(a)
    if not np.isfinite(det) or abs(det) < 1e-300:
        raise InputError("matrix must be invertible")
    pts = mu.points @ a.T + shift
    return DiscreteMeasure.from_points(pts, mu.weights * mass_scale)


def support_in(mu: DiscreteMeasure, x, r: float) -> np.ndarray:
    """Support points inside the open ball, sorted by distance then index."""
    x = np.asarray(x, dtype=float)
    idx = mu.indices_in_ball(x, r)
    if idx.size == 0:
        return np.empty((0, mu.dim))
    d = np.linalg.norm(mu.points[idx] - x, axis=1)
    order = np.lexsort((idx, d))
    return mu.points[idx[order]].copy()


def snap_to_support(mu: DiscreteMeasure, x, tol: float = 1e-9) -> np.ndarray:
    """Snap X to the nearest support point; error if farther than tol.

    Keeps the 'X lies on the support' precondition of the density and
    flatness statements literally true for discrete data.
    """
    x = np.asarray(x, dtype=float)
    idx = mu.nearest_point_index(x)
    p = mu.points[idx]
    if float(np.linalg.norm(p - x)) > tol:
        raise DomainError(
            f"point {x.tolist()} is {float(np.linalg.norm(p - x)):.3e} away from the "
            f"support (tolerance {tol:.1e})"
        )
    return p.copy()


def load_measure_csv(path) -> DiscreteMeasure:
    """Read a point-cloud CSV with header x0,...,x{d-1},weight.

    Weights are mandatory and must be strictly positive; there is no implicit
    weight of 1, so densities cannot be silently misread.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if header[-1] != "weight" or not all(h == f"x{i}" for i, h in enumerate(header[:-1])):
            raise InputError(f"{path}: expected header x0,...,x{{d-1}},weight, got {header}")
        rows = [row for row in reader if row]
    if not rows:
        raise InputError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    if data.shape[1] != len(header):
        raise InputError(f"{path}: ragged rows")
    pts, w = data[:, :-1], data[:, -1]
    if np.any(w <= 0):
        raise InputError(f"{path}: non-positive weights rejected")
    return DiscreteMeasure.from_points(pts, w)


def save_measure_csv(mu: DiscreteMeasure, path) -> None:
    header = [f"x{i}" for i in range(mu.dim)] + ["weight"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for p, w in zip(mu.points, mu.weights):
            writer.writerow([repr(float(v)) for v in p] + [repr(float(w))])


def farthest_point_indices(points: np.ndarray, count: int, start: Optional[int] = None) -> np.ndarray:
    """Deterministic farthest-point subsample of a point set.

    The seed point defaults to the point nearest the centroid, which makes
    the subsample stable under point reordering of symmetric clouds.
    """
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    if count >= n:
        return np.arange(n)
    if start is None:
        centroid = pts.mean(axis=0)
        start = int(np.argmin(np.linalg.norm(pts - centroid, axis=1)))
    chosen = [start]
    dist = np.linalg.norm(pts - pts[start], axis=1)
    for _ in range(count - 1):
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(pts - pts[nxt], axis=1))
    return np.asarray(chosen, dtype=int)
