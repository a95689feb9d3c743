"""Scattered point clouds with boundary metadata and per-point neighbor stencils.

A PointCloud is immutable after ``build_clouds``: every point carries the
indices of its q nearest neighbors (itself first), found with a KD-tree under
the Euclidean metric, optionally wrapped on periodic axes. Ties are broken by
the smaller point index so cloud construction is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .io_utils import write_csv

FLAG_INTERIOR = 0
FLAG_BOUNDARY = 1
FLAG_PERIODIC_IMAGE = 2  # reserved: wraparound clouds make image points unnecessary


class CloudError(ValueError):
    pass


@dataclass
class PointCloud:
    """Point set with boundary flags, outward normals and neighbor clouds.

    ``groups`` tags boundary points for boundary-condition assignment
    (0 for interior; meaning is geometry-specific). ``spacing`` is the
    average spacing sqrt(area / n_points).
    """

    points: np.ndarray            # (n, 2)
    flags: np.ndarray             # (n,) int8
    normals: np.ndarray           # (n, 2), zero rows for interior
    groups: np.ndarray            # (n,) int64
    spacing: float
    area: float
    periodic: tuple = (False, False)
    extents: tuple = (0.0, 1.0, 0.0, 1.0)
    clouds: np.ndarray | None = None   # (n, q) int32, self first

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def q(self) -> int:
        return 0 if self.clouds is None else self.clouds.shape[1]

    @property
    def interior_idx(self) -> np.ndarray:
        return np.flatnonzero(self.flags == FLAG_INTERIOR)

    @property
    def boundary_idx(self) -> np.ndarray:
        return np.flatnonzero(self.flags == FLAG_BOUNDARY)

    def displacements(self, center: int, neighbors: np.ndarray) -> np.ndarray:
        """Neighbor coordinates relative to a center, minimal-image on periodic axes."""
        disp = self.points[neighbors] - self.points[center]
        return self.wrap(disp)

    def wrap(self, disp: np.ndarray) -> np.ndarray:
        """Map displacement vectors to the minimal periodic image."""
        if not any(self.periodic):
            return disp
        disp = np.array(disp, dtype=float, copy=True)
        xmin, xmax, ymin, ymax = self.extents
        for axis, (per, span) in enumerate(zip(self.periodic,
                                               (xmax - xmin, ymax - ymin))):
            if per:
                disp[..., axis] -= span * np.round(disp[..., axis] / span)
        return disp

    def validate(self) -> None:
        """Check the structural invariants; raises CloudError on violation."""
        pts = self.points
        if not np.all(np.isfinite(pts)):
            raise CloudError("non-finite point coordinates")
        if len(self.flags) != len(pts) or len(self.normals) != len(pts):
            raise CloudError("metadata arrays disagree with point count")
        bidx = self.boundary_idx
        if bidx.size:
            norms = np.linalg.norm(self.normals[bidx], axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-12):
                raise CloudError("boundary normals are not unit vectors")
        if self.n_points > 1:
            tree = cKDTree(pts)
            d, _ = tree.query(pts, k=2)
            if np.min(d[:, 1]) <= 1e-12 * self.spacing:
                raise CloudError("duplicate points detected")
        if self.clouds is not None:
            if np.any(self.clouds[:, 0] != np.arange(self.n_points)):
                raise CloudError("cloud row does not start with its own index")
            for i in range(self.n_points):
                row = self.clouds[i]
                if len(np.unique(row)) != len(row):
                    raise CloudError(f"cloud {i} has repeated indices")
                d = np.linalg.norm(self.displacements(i, row), axis=1)
                if np.any(np.diff(d[1:]) < -1e-12):
                    raise CloudError(f"cloud {i} distances are not non-decreasing")

    def to_csv(self, path) -> None:
        """Dump as ``id,x,y,flag,nx,ny`` CSV."""
        rows = ((i, self.points[i, 0], self.points[i, 1], int(self.flags[i]),
                 self.normals[i, 0], self.normals[i, 1])
                for i in range(self.n_points))
        write_csv(path, ["id", "x", "y", "flag", "nx", "ny"], rows)


def from_csv(path, spacing: float | None = None, area: float | None = None) -> PointCloud:
    """Load a cloud dumped by :meth:`PointCloud.to_csv`."""
    raw = np.genfromtxt(path, delimiter=",", names=True)
    raw = np.atleast_1d(raw)
    pts = np.column_stack([raw["x"], raw["y"]])
    flags = raw["flag"].astype(np.int8)
    normals = np.column_stack([raw["nx"], raw["ny"]])
    n = len(pts)
    if area is None:
        span = pts.max(axis=0) - pts.min(axis=0)
        area = float(span[0] * span[1]) if n > 1 else 1.0
    if spacing is None:
        spacing = float(np.sqrt(area / n)) if n else 1.0
    ext = (pts[:, 0].min(), pts[:, 0].max(), pts[:, 1].min(), pts[:, 1].max()) \
        if n else (0.0, 1.0, 0.0, 1.0)
    return PointCloud(points=pts, flags=flags, normals=normals,
                      groups=np.zeros(n, dtype=np.int64), spacing=spacing,
                      area=area, extents=ext)


def _knn_indices(points, q, periodic, extents):
    """q nearest neighbors per point, ties broken by smaller index."""
    n = len(points)
    xmin, xmax, ymin, ymax = extents
    if periodic[0] and periodic[1]:
        span = np.array([xmax - xmin, ymax - ymin])
        shifted = (points - [xmin, ymin]) % span
        tree = cKDTree(shifted, boxsize=span)
        query_pts = shifted
    elif periodic[0] or periodic[1]:
        # single-axis wrap: tile images along the periodic axis
        axis = 0 if periodic[0] else 1
        span = (xmax - xmin) if axis == 0 else (ymax - ymin)
        shift = np.zeros(2)
        shift[axis] = span
        tiled = np.vstack([points, points + shift, points - shift])
        tree = cKDTree(tiled)
        query_pts = points
    else:
        tree = cKDTree(points)
        query_pts = points

    mixed = periodic[0] != periodic[1]
    k_query = min(2 * q + 16 if mixed else q + 8, tree.n)
    dist, idx = tree.query(query_pts, k=k_query)
    if mixed:
        idx = idx % n  # map images back to source indices

    clouds = np.empty((n, q), dtype=np.int32)
    for i in range(n):
        di, ii = dist[i], idx[i]
        if mixed:
            # an image and its source can both appear; keep the closest copy
            _, first = np.unique(ii, return_index=True)
            keep = np.sort(first)
            di, ii = di[keep], ii[keep]
        order = np.lexsort((ii, di))  # exact distance, index breaks ties
        sel = ii[order]
        sel = sel[sel != i][: q - 1]
        clouds[i, 0] = i
        clouds[i, 1:] = sel
    return clouds


def build_clouds(cloud: PointCloud, q: int,
                 periodic: tuple | None = None) -> PointCloud:
    """Attach q-nearest-neighbor stencils (self first) to every point.

    Periodic axes use the wraparound (toroidal) distance metric. The input
    cloud is not modified; a copy with ``clouds`` set is returned.
    """
    n = cloud.n_points
    if q > n:
        raise CloudError(f"cloud size q={q} exceeds point count {n}")
    if q < 1:
        raise CloudError("cloud size q must be at least 1")
    per = cloud.periodic if periodic is None else tuple(periodic)
    clouds = _knn_indices(cloud.points, q, per, cloud.extents)
    return replace(cloud, periodic=per, clouds=clouds)


def torus_distance(p, q, extents) -> float:
    """Euclidean distance on the doubly periodic rectangle."""
    xmin, xmax, ymin, ymax = extents
    span = np.array([xmax - xmin, ymax - ymin])
    d = np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))
    d = np.minimum(d, span - d)
    return float(np.hypot(d[0], d[1]))
