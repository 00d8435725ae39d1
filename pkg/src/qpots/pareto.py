"""Pareto dominance, nondominated sorting, hypervolume, and IGD.

All dominance comparisons use the maximization convention: ``a`` dominates
``b`` when ``a >= b`` componentwise with strict inequality in at least one
component.  Minimization benchmarks are negated at ingestion (see
:mod:`qpots.problems`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InvalidArgumentError


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2:
        raise InvalidArgumentError(f"expected a 2-D point array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise InvalidArgumentError("objective vectors must be finite")
    return pts


def dominates(a, b) -> bool:
    """True iff ``a`` dominates ``b`` (maximization convention)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return bool(np.all(a >= b) and np.any(a > b))


def dominance_matrix(points, chunk: int = 2048) -> np.ndarray:
    """Boolean matrix ``D`` with ``D[i, j]`` true iff point i dominates point j."""
    pts = _as_points(points)
    n = pts.shape[0]
    dom = np.zeros((n, n), dtype=bool)
    for start in range(0, n, chunk):
        block = pts[start : start + chunk]  # (b, k)
        ge = np.all(block[:, None, :] >= pts[None, :, :], axis=2)
        gt = np.any(block[:, None, :] > pts[None, :, :], axis=2)
        dom[start : start + chunk] = ge & gt
    return dom


def nondominated_filter(points) -> np.ndarray:
    """Indices of points not dominated by any other, in original order."""
    pts = _as_points(points)
    if pts.shape[0] == 0:
        raise InvalidArgumentError("nondominated_filter requires a nonempty set")
    n = pts.shape[0]
    dominated = np.zeros(n, dtype=bool)
    chunk = max(1, int(2**22 // max(n, 1)))
    for start in range(0, n, chunk):
        block = pts[start : start + chunk]
        ge = np.all(pts[None, :, :] >= block[:, None, :], axis=2)
        gt = np.any(pts[None, :, :] > block[:, None, :], axis=2)
        dominated[start : start + chunk] = np.any(ge & gt, axis=1)
    return np.flatnonzero(~dominated)


def peel_fronts(dom: np.ndarray) -> list[np.ndarray]:
    """Partition indices into fronts given a dominance matrix."""
    n = dom.shape[0]
    counts = dom.sum(axis=0).astype(int)
    assigned = np.zeros(n, dtype=bool)
    fronts: list[np.ndarray] = []
    while not assigned.all():
        current = np.flatnonzero((counts == 0) & ~assigned)
        if current.size == 0:  # pragma: no cover - cycles are impossible
            raise RuntimeError("dominance relation produced no next front")
        fronts.append(current)
        assigned[current] = True
        counts -= dom[current].sum(axis=0)
    return fronts


def fast_nondominated_sort(points) -> list[np.ndarray]:
    """Partition points into nondominated fronts F1, F2, ... (index arrays)."""
    pts = _as_points(points)
    if pts.shape[0] == 0:
        raise InvalidArgumentError("fast_nondominated_sort requires a nonempty set")
    return peel_fronts(dominance_matrix(pts))


def _hv_recursive(pts: np.ndarray) -> float:
    """Exact measure of the union of boxes [0, p] for points p > 0."""
    n, k = pts.shape
    if n == 0:
        return 0.0
    if k == 1:
        return float(pts[:, 0].max())
    if k == 2:
        order = np.argsort(-pts[:, 0], kind="stable")
        hv = 0.0
        best_y = 0.0
        for x, y in pts[order]:
            if y > best_y:
                hv += x * (y - best_y)
                best_y = y
        return hv
    order = np.argsort(-pts[:, -1], kind="stable")
    sorted_pts = pts[order]
    hv = 0.0
    for i in range(n):
        z_hi = sorted_pts[i, -1]
        z_lo = sorted_pts[i + 1, -1] if i + 1 < n else 0.0
        if z_hi <= z_lo:
            continue
        proj = sorted_pts[: i + 1, :-1]
        proj = proj[nondominated_filter(proj)]
        hv += (z_hi - z_lo) * _hv_recursive(proj)
    return hv


def _clip_to_ref(front: np.ndarray, ref: np.ndarray) -> np.ndarray:
    keep = np.all(front > ref[None, :], axis=1)
    return front[keep] - ref[None, :]


def hypervolume_exact(front, ref) -> float:
    """Exact hypervolume by recursive dimension sweep (maximization)."""
    ref = np.asarray(ref, dtype=float)
    pts = _as_points(front) if len(front) else np.empty((0, ref.size))
    if pts.shape[0] == 0:
        return 0.0
    if pts.shape[1] != ref.size:
        raise InvalidArgumentError("front and reference point dimensions differ")
    shifted = _clip_to_ref(pts, ref)
    if shifted.shape[0] == 0:
        return 0.0
    shifted = shifted[nondominated_filter(shifted)]
    return _hv_recursive(shifted)


def hypervolume_mc(front, ref, n_samples: int = 2**20, rng=None, chunk: int = 2**18):
    """Monte-Carlo hypervolume estimate.

    Returns ``(estimate, standard_error)``.  Samples are drawn uniformly in
    the box spanned by the reference point and the componentwise maximum of
    the front.
    """
    ref = np.asarray(ref, dtype=float)
    pts = _as_points(front) if len(front) else np.empty((0, ref.size))
    shifted = _clip_to_ref(pts, ref)
    if shifted.shape[0] == 0:
        return 0.0, 0.0
    if rng is None:
        rng = np.random.default_rng(0)
    upper = shifted.max(axis=0)
    volume = float(np.prod(upper))
    if volume <= 0.0:
        return 0.0, 0.0
    # biggest boxes first so most samples are resolved early
    order = np.argsort(-np.prod(shifted, axis=1), kind="stable")
    boxes = shifted[order]
    hits = 0
    total = 0
    while total < n_samples:
        m = min(chunk, n_samples - total)
        alive = rng.random((m, ref.size)) * upper[None, :]
        for p in boxes:
            inside = np.all(alive <= p[None, :], axis=1)
            hits += int(inside.sum())
            alive = alive[~inside]
            if alive.shape[0] == 0:
                break
        total += m
    frac = hits / total
    est = volume * frac
    se = volume * float(np.sqrt(max(frac * (1.0 - frac), 0.0) / total))
    return est, se


def hypervolume(front, ref, mc_samples: int = 2**20, rng=None) -> float:
    """Hypervolume of ``front`` w.r.t. reference point ``ref``.

    Exact recursive sweep for up to 4 objectives; Monte-Carlo estimate above
    that (use :func:`hypervolume_mc` directly when the standard error is
    needed).  An empty front has hypervolume 0.
    """
    ref = np.asarray(ref, dtype=float)
    if ref.size < 2:
        raise InvalidArgumentError("hypervolume requires at least 2 objectives")
    if len(front) == 0:
        return 0.0
    if ref.size <= 4:
        return hypervolume_exact(front, ref)
    est, _ = hypervolume_mc(front, ref, n_samples=mc_samples, rng=rng)
    return est


def igd(front, reference_front, normalize: bool = False) -> float:
    """Mean distance from reference-front members to their nearest front member.

    With ``normalize=True`` both fronts are scaled by the reference front's
    per-objective range first, so the tolerance is meaningful regardless of
    objective units.
    """
    f = _as_points(front)
    r = _as_points(reference_front)
    if f.shape[0] == 0 or r.shape[0] == 0:
        raise InvalidArgumentError("igd requires nonempty fronts")
    if f.shape[1] != r.shape[1]:
        raise InvalidArgumentError("front dimensions differ")
    if normalize:
        span = r.max(axis=0) - r.min(axis=0)
        span[span <= 0] = 1.0
        f = f / span[None, :]
        r = r / span[None, :]
    return float(cdist(r, f).min(axis=1).mean())


@dataclass
class ParetoFront:
    """A mutually nondominated set of objective vectors and their preimages."""

    points: np.ndarray
    preimages: np.ndarray

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.preimages = np.atleast_2d(np.asarray(self.preimages, dtype=float))
        if self.points.size == 0:
            self.points = self.points.reshape(0, self.points.shape[-1] if self.points.ndim else 0)
        if self.preimages.size == 0:
            self.preimages = self.preimages.reshape(0, self.preimages.shape[-1] if self.preimages.ndim else 0)
        if len(self.points) != len(self.preimages):
            raise InvalidArgumentError("points and preimages must align")

    @classmethod
    def empty(cls, n_obj: int, n_var: int) -> "ParetoFront":
        return cls(np.empty((0, n_obj)), np.empty((0, n_var)))

    @classmethod
    def from_evaluations(cls, preimages, points) -> "ParetoFront":
        """Keep the nondominated subset (maximization convention)."""
        points = _as_points(points)
        preimages = np.asarray(preimages, dtype=float)
        idx = nondominated_filter(points)
        return cls(points[idx], preimages[idx])

    def __len__(self) -> int:
        return int(self.points.shape[0])

    @property
    def is_empty(self) -> bool:
        return len(self) == 0
