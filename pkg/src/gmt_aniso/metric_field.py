"""Point-dependent SPD metric fields and the ellipse geometry they induce.

A metric field assigns to every point X a symmetric positive definite matrix
L(X); the associated ellipse of center X and radius r is the affine image
X + L(X)B(0,r) of the Euclidean ball, equivalently the sublevel set
{Z : |L(X)^{-1}(Z-X)| < r}.  Everything downstream (anisotropic masses,
bilateral flatness in ellipses, blow-up maps) is phrased in terms of this
module's evaluations, eigenvalue bounds over compact boxes, and the nested
non-concentric ellipse radii.

Fields are immutable after construction and evaluation is pure, so instances
can be shared freely across worker threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence

import numpy as np

from .errors import ExtrapolationError, InputError, SpdViolationError

_SYM_TOL = 1e-12
_RECON_TOL = 1e-9


def _jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 60):
    """Cyclic Jacobi eigendecomposition of a small symmetric matrix.

    Returns (eigenvalues ascending, eigenvectors as columns).  Deterministic:
    the sweep order is fixed, so identical input bits give identical output
    bits.  Intended for d <= 4; cost is irrelevant at that size.
    """
    a = np.array(a, dtype=float, copy=True)
    d = a.shape[0]
    v = np.eye(d)
    scale = max(1.0, float(np.max(np.abs(np.diag(a)))))
    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(np.tril(a, -1) ** 2)))
        if off <= tol * scale:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(d)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    order = np.argsort(np.diag(a), kind="stable")
    return np.diag(a)[order].copy(), v[:, order].copy()


@dataclass(frozen=True)
class SpdMatrix:
    """A validated symmetric positive definite matrix with its spectrum.

    eigenvalues are ascending; eigenvectors[:, i] belongs to eigenvalues[i].
    """

    entries: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @classmethod
    def from_entries(cls, entries) -> "SpdMatrix":
        m = np.asarray(entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InputError(f"expected a square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InputError("matrix has non-finite entries")
        asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
        if asym > _SYM_TOL:
            raise InputError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
        lam, vec = _jacobi_eigh(m)
        if lam[0] <= 0.0:
            raise SpdViolationError(f"matrix is not positive definite (min eigenvalue {lam[0]:.3e})")
        recon = vec @ np.diag(lam) @ vec.T
        scale = max(float(np.linalg.norm(m)), 1e-300)
        if float(np.linalg.norm(recon - m)) > _RECON_TOL * scale:
            raise SpdViolationError("eigendecomposition failed to reconstruct the matrix")
        m.setflags(write=False)
        lam.setflags(write=False)
        vec.setflags(write=False)
        return cls(entries=m, eigenvalues=lam, eigenvectors=vec)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    def inverse(self) -> np.ndarray:
        return self.eigenvectors @ np.diag(1.0 / self.eigenvalues) @ self.eigenvectors.T

    def apply(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v, dtype=float) @ self.entries.T

    def apply_inverse(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v, dtype=float) @ self.inverse().T


@dataclass(frozen=True)
class MetricField:
    """Anisotropy field L(.) of one of four kinds.

    kind "identity":   L(X) = Id.
    kind "constant":   L(X) = matrix, everywhere.
    kind "sinusoidal": L(X) = base + amplitude * sin(frequency * sum(X)) * direction,
                       with `direction` symmetric; SPD everywhere as long as
                       amplitude * ||direction|| < lambda_min(base).
    kind "grid":       samples on a regular axis-aligned lattice (origin,
                       spacing, shape), combined by nearest or entrywise
                       multilinear interpolation with symmetrization; queries
                       outside the lattice hull raise ExtrapolationError.

    holder_exponent is the Holder exponent used by every downstream bound; it
    is an input, never estimated.
    """

    kind: str
    ambient_dim: int
    holder_exponent: float
    matrix: Optional[SpdMatrix] = None
    amplitude: float = 0.0
    direction: Optional[np.ndarray] = None
    frequency: float = 1.0
    grid_origin: Optional[np.ndarray] = None
    grid_spacing: float = 1.0
    grid_shape: Optional[tuple] = None
    grid_samples: Optional[np.ndarray] = None
    grid_interpolation: str = "multilinear"

    def __post_init__(self):
        if self.kind not in ("identity", "constant", "sinusoidal", "grid"):
            raise InputError(f"unknown field kind {self.kind!r}")
        if self.ambient_dim < 2:
            raise InputError("ambient_dim must be >= 2")
        if not (0.0 < self.holder_exponent < 1.0):
            raise InputError("holder_exponent must lie in (0, 1)")
        if self.kind in ("constant", "sinusoidal"):
            if self.matrix is None or self.matrix.dim != self.ambient_dim:
                raise InputError(f"{self.kind} field needs a base SpdMatrix of dimension {self.ambient_dim}")
        if self.kind == "sinusoidal":
            direction = np.asarray(self.direction, dtype=float)
            if direction.shape != (self.ambient_dim, self.ambient_dim):
                raise InputError("sinusoidal field needs a square direction matrix")
            if float(np.max(np.abs(direction - direction.T))) > _SYM_TOL:
                raise InputError("direction matrix must be symmetric")
            dir_norm = float(np.max(np.abs(np.linalg.eigvalsh(direction))))
            if abs(self.amplitude) * dir_norm >= self.matrix.lambda_min:
                raise SpdViolationError(
                    "amplitude * ||direction|| must stay below the base matrix's "
                    "smallest eigenvalue to keep the field SPD"
                )
            object.__setattr__(self, "direction", direction)
        if self.kind == "grid":
            if self.grid_origin is None or self.grid_shape is None or self.grid_samples is None:
                raise InputError("grid field needs origin, shape and samples")
            origin = np.asarray(self.grid_origin, dtype=float)
            shape = tuple(int(s) for s in self.grid_shape)
            samples = np.asarray(self.grid_samples, dtype=float)
            d = self.ambient_dim
            n_nodes = int(np.prod(shape))
            if origin.shape != (d,) or len(shape) != d:
                raise InputError("grid origin/shape dimension mismatch")
            if self.grid_spacing <= 0:
                raise InputError("grid spacing must be positive")
            if samples.shape != (n_nodes, d, d):
                raise InputError(f"expected {n_nodes} samples of shape ({d},{d}), got {samples.shape}")
            if self.grid_interpolation not in ("nearest", "multilinear"):
                raise InputError("grid interpolation must be 'nearest' or 'multilinear'")
            for k in range(n_nodes):
                SpdMatrix.from_entries(samples[k])
            object.__setattr__(self, "grid_origin", origin)
            object.__setattr__(self, "grid_shape", shape)
            object.__setattr__(self, "grid_samples", samples)

    def eval(self, x) -> SpdMatrix:
        """Evaluate the field at a point.  Pure and deterministic."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.ambient_dim,):
            raise InputError(f"point has shape {x.shape}, expected ({self.ambient_dim},)")
        if not np.all(np.isfinite(x)):
            raise InputError("point has non-finite coordinates")
        if self.kind == "identity":
            return _identity_spd(self.ambient_dim)
        if self.kind == "constant":
            return self.matrix
        if self.kind == "sinusoidal":
            entries = self.matrix.entries + self.amplitude * math.sin(self.frequency * float(np.sum(x))) * self.direction
            return SpdMatrix.from_entries(entries)
        return self._eval_grid(x)

    def _eval_grid(self, x: np.ndarray) -> SpdMatrix:
        rel = (x - self.grid_origin) / self.grid_spacing
        hi = np.asarray(self.grid_shape, dtype=float) - 1.0
        if np.any(rel < -1e-12) or np.any(rel > hi + 1e-12):
            raise ExtrapolationError(f"point {x.tolist()} is outside the grid hull")
        rel = np.clip(rel, 0.0, hi)
        if self.grid_interpolation == "nearest":
            idx = np.minimum(np.round(rel).astype(int), np.asarray(self.grid_shape) - 1)
            return SpdMatrix.from_entries(self.grid_samples[self._flat(idx)])
        base = np.minimum(np.floor(rel).astype(int), np.maximum(np.asarray(self.grid_shape) - 2, 0))
        frac = rel - base
        d = self.ambient_dim
        acc = np.zeros((d, d))
        for corner in range(1 << d):
            offs = np.array([(corner >> i) & 1 for i in range(d)])
            w = float(np.prod(np.where(offs == 1, frac, 1.0 - frac)))
            if w == 0.0:
                continue
            idx = np.minimum(base + offs, np.asarray(self.grid_shape) - 1)
            acc += w * self.grid_samples[self._flat(idx)]
        acc = 0.5 * (acc + acc.T)
        return SpdMatrix.from_entries(acc)

    def _flat(self, idx: np.ndarray) -> int:
        return int(np.ravel_multi_index(tuple(int(i) for i in idx), self.grid_shape))

    def to_json_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "ambient_dim": self.ambient_dim,
            "holder_exponent": self.holder_exponent,
        }
        if self.kind == "constant":
            out["matrix"] = self.matrix.entries.tolist()
        elif self.kind == "sinusoidal":
            out["base"] = self.matrix.entries.tolist()
            out["amplitude"] = self.amplitude
            out["direction"] = self.direction.tolist()
            out["frequency"] = self.frequency
        elif self.kind == "grid":
            out["origin"] = self.grid_origin.tolist()
            out["spacing"] = self.grid_spacing
            out["shape"] = list(self.grid_shape)
            # row-major flattening of each sample, samples in lattice order
            out["samples"] = [m.reshape(-1).tolist() for m in self.grid_samples]
            out["interpolation"] = self.grid_interpolation
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "MetricField":
        kind = data["kind"]
        d = int(data["ambient_dim"])
        beta = float(data.get("holder_exponent", 0.5))
        if kind == "identity":
            return cls(kind="identity", ambient_dim=d, holder_exponent=beta)
        if kind == "constant":
            return cls(
                kind="constant",
                ambient_dim=d,
                holder_exponent=beta,
                matrix=SpdMatrix.from_entries(data["matrix"]),
            )
        if kind == "sinusoidal":
            return cls(
                kind="sinusoidal",
                ambient_dim=d,
                holder_exponent=beta,
                matrix=SpdMatrix.from_entries(data["base"]),
                amplitude=float(data["amplitude"]),
                direction=np.asarray(data["direction"], dtype=float),
                frequency=float(data.get("frequency", 1.0)),
            )
        if kind == "grid":
            samples = np.asarray([np.reshape(s, (d, d)) for s in data["samples"]], dtype=float)
            return cls(
                kind="grid",
                ambient_dim=d,
                holder_exponent=beta,
                grid_origin=np.asarray(data["origin"], dtype=float),
                grid_spacing=float(data["spacing"]),
                grid_shape=tuple(int(s) for s in data["shape"]),
                grid_samples=samples,
                grid_interpolation=data.get("interpolation", "multilinear"),
            )
        raise InputError(f"unknown field kind {kind!r}")


_IDENTITY_CACHE: dict = {}


def _identity_spd(d: int) -> SpdMatrix:
    if d not in _IDENTITY_CACHE:
        eye = np.eye(d)
        _IDENTITY_CACHE[d] = SpdMatrix(
            entries=eye, eigenvalues=np.ones(d), eigenvectors=np.eye(d)
        )
        for arr in (eye,):
            arr.setflags(write=False)
    return _IDENTITY_CACHE[d]


def load_field_json(path) -> MetricField:
    with open(path, "r", encoding="utf-8") as fh:
        return MetricField.from_json_dict(json.load(fh))


def save_field_json(field: MetricField, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(field.to_json_dict(), fh, indent=2, sort_keys=True)


@dataclass(frozen=True)
class CompactBounds:
    """Eigenvalue bounds of the field over (the support near) a compact box.

    delta_K = min(lambda_min_K, 1/eccentricity) is the admissibility threshold
    of the flatness-comparison statement, and m_K = (2 + eccentricity) *
    lambda_max_K the constant that converts Euclidean into elliptic flatness.
    holder_constant is a sampled estimate of the Holder seminorm of the field.
    """

    lambda_min_K: float
    lambda_max_K: float
    eccentricity: float
    delta_K: float
    m_K: float
    holder_constant: float
    n_points: int = 0

    def __post_init__(self):
        if not (0.0 < self.lambda_min_K <= self.lambda_max_K):
            raise InputError("need 0 < lambda_min_K <= lambda_max_K")


def compact_bounds(
    field: MetricField,
    support_points,
    box_lo,
    box_hi,
    neighborhood: float = 1.0,
    max_pairs: int = 10_000,
    seed: int = 0,
) -> CompactBounds:
    """Extremal eigenvalues, eccentricity and Holder estimate near a box.

    The extrema run over field evaluations at every support point within the
    closed `neighborhood` of the axis-aligned box [box_lo, box_hi]; the Holder
    constant is the max of ||L(X)-L(Y)|| / |X-Y|^beta over up to `max_pairs`
    seeded random pairs of those points.
    """
    pts = np.asarray(support_points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != field.ambient_dim:
        raise InputError("support_points must be an (N, d) array matching the field dimension")
    lo = np.asarray(box_lo, dtype=float)
    hi = np.asarray(box_hi, dtype=float)
    if np.any(hi < lo):
        raise InputError("box_hi must dominate box_lo")
    gap = np.maximum(np.maximum(lo - pts, pts - hi), 0.0)
    dist = np.linalg.norm(gap, axis=1)
    sel = np.nonzero(dist <= neighborhood)[0]
    if sel.size == 0:
        raise InputError("no support point lies within the neighborhood of the box")

    mats = [field.eval(pts[i]) for i in sel]
    lam_min = min(m.lambda_min for m in mats)
    lam_max = max(m.lambda_max for m in mats)
    ecc = lam_max / lam_min

    if field.kind in ("identity", "constant") or sel.size < 2:
        holder = 0.0
    else:
        rng = np.random.default_rng(seed)
        n_pairs = min(max_pairs, sel.size * (sel.size - 1) // 2)
        ii = rng.integers(0, sel.size, size=n_pairs)
        jj = rng.integers(0, sel.size, size=n_pairs)
        holder = 0.0
        beta = field.holder_exponent
        for i, j in zip(ii, jj):
            if i == j:
                continue
            sep = float(np.linalg.norm(pts[sel[i]] - pts[sel[j]]))
            if sep < 1e-12:
                continue
            diff = mats[i].entries - mats[j].entries
            op_norm = float(np.max(np.abs(np.linalg.eigvalsh(diff))))
            holder = max(holder, op_norm / sep**beta)

    return CompactBounds(
        lambda_min_K=lam_min,
        lambda_max_K=lam_max,
        eccentricity=ecc,
        delta_K=min(lam_min, 1.0 / ecc),
        m_K=(2.0 + ecc) * lam_max,
        holder_constant=holder,
        n_points=int(sel.size),
    )


def ellipse_contains(field: MetricField, x, r: float, z) -> bool:
    """Open-ellipse membership test: |L(X)^{-1}(Z-X)| < r."""
    if r <= 0:
        raise InputError("radius must be positive")
    mat = field.eval(x)
    w = np.linalg.solve(mat.entries, np.asarray(z, dtype=float) - np.asarray(x, dtype=float))
    return bool(np.linalg.norm(w) < r)


def nested_radii(
    field: MetricField,
    x,
    y,
    r: float,
    bounds: CompactBounds,
) -> tuple[float, Optional[float]]:
    """Radii for the non-concentric nesting of ellipses at nearby centers.

    Returns (outer, inner) with
        B_L(X, r)  contained in  B_L(Y, outer),
        B_L(Y, inner)  contained in  B_L(X, r)   (when inner is not None).
    outer = r + |X-Y|/lambda_min(X) + C_K r^(1+beta); inner mirrors it with a
    minus sign and is reported only under the gate |X-Y| <= lambda_min(X) r/2
    with a positive value.  C_K = H_K (1 + 1/lambda_min_K) folds the Holder
    constant and the eigenvalue floor of the proof's estimate chain.
    """
    if r <= 0:
        raise InputError("radius must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lam_min_x = field.eval(x).lambda_min
    beta = field.holder_exponent
    c_k = bounds.holder_constant * (1.0 + 1.0 / bounds.lambda_min_K)
    sep = float(np.linalg.norm(x - y))
    correction = sep / lam_min_x + c_k * r ** (1.0 + beta)
    outer = r + correction
    inner: Optional[float] = None
    if sep <= lam_min_x * r / 2.0:
        candidate = r - correction
        if candidate > 0.0:
            inner = candidate
    return outer, inner
