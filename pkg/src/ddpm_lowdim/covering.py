"""epsilon-nets and covering-number dimension estimates for point clouds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .errors import InvalidParameterError

MAX_POINTS = 100_000


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise InvalidParameterError("a point cloud needs at least one row")
        if pts.shape[0] > MAX_POINTS:
            raise InvalidParameterError(f"point clouds are capped at {MAX_POINTS} points")
        if not np.all(np.isfinite(pts)):
            raise InvalidParameterError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def radius(self) -> float:
        return float(np.max(np.linalg.norm(self.points, axis=1)))


def greedy_epsilon_net(cloud: PointCloud, eps: float) -> np.ndarray:
    """Farthest-point traversal from point 0 until every point is within eps.

    Ties go to the lowest index. Consecutive centers are more than eps
    apart, so the net is an eps-packing and its size is at most the
    eps-packing number (itself at most N_{eps/2}).
    """
    if not eps > 0:
        raise InvalidParameterError("eps must be positive")
    return kernels.greedy_net(cloud.points, float(eps))


def cover_radius(cloud: PointCloud, net) -> float:
    """Largest distance from a cloud point to its nearest net point."""
    dist, _ = cKDTree(cloud.points[np.asarray(net)]).query(cloud.points, k=1)
    return float(np.max(dist))


def is_cover(cloud: PointCloud, net, eps: float, rtol: float = 1e-9) -> bool:
    """True when every point is within eps of the net, up to roundoff ``rtol``."""
    return cover_radius(cloud, net) <= eps * (1.0 + rtol)


def intrinsic_dim_estimate(cloud: PointCloud, T: int, c_eps: float = 1.0, C_cover: float = 1.0) -> float:
    """log |net at eps = T^-c_eps| / (C_cover log T)."""
    if T < 2 or not c_eps > 0 or not C_cover > 0:
        raise InvalidParameterError("need T >= 2, c_eps > 0, C_cover > 0")
    if np.all(cloud.points == cloud.points[0]):
        return 0.0
    size = greedy_epsilon_net(cloud, float(T) ** (-c_eps)).size
    return math.log(size) / (C_cover * math.log(T))


def grid_cloud(r: int, per_side: int, d: int, side: float = 1.0) -> PointCloud:
    """Regular r-dim grid on [0, side]^r, embedded in the first r of d coordinates."""
    axes = [np.linspace(0.0, side, per_side)] * r
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, r)
    pts = np.zeros((mesh.shape[0], d))
    pts[:, :r] = mesh
    return PointCloud(pts)
