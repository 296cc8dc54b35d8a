"""Static environment: primitive scenes and the voxelized distance field.

Scenes are unions of analytic primitives (floor half-space, axis-aligned
boxes, spheres, vertical cylinders), which gives every query an exact
ground truth. The Esdf samples the scene at voxel centers, caches a
finite-difference gradient per voxel with its norm clipped to [0, 1], and
answers queries with the first-order model of the closest voxel center.
Grids are immutable once built; linear storage is x-fastest.
"""

import json
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, GridTooLarge

DEFAULT_VOXEL_SIZE = 0.10
DEFAULT_VOXEL_BUDGET = 20_000_000

_MAGIC = b"CFSDF001"


@dataclass(frozen=True)
class Floor:
    z: float
    id: str = "floor"

    def sdf(self, pts):
        d = pts[:, 2] - self.z
        g = np.zeros_like(pts)
        g[:, 2] = 1.0
        return d, g


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray
    id: str = "box"

    def sdf(self, pts):
        q = np.maximum(self.lo - pts, pts - self.hi)
        qp = np.maximum(q, 0.0)
        d_out = np.linalg.norm(qp, axis=1)
        q_max = q.max(axis=1)
        d = d_out + np.minimum(q_max, 0.0)

        g = np.zeros_like(pts)
        outside = d_out > 0.0
        if np.any(outside):
            sign = np.where(pts > self.hi, 1.0, np.where(pts < self.lo, -1.0, 0.0))
            g[outside] = sign[outside] * qp[outside] / d_out[outside, None]
        inside = ~outside
        if np.any(inside):
            axis = q[inside].argmax(axis=1)
            center = 0.5 * (self.lo + self.hi)
            sgn = np.where(pts[inside, axis] >= center[axis], 1.0, -1.0)
            gi = np.zeros((inside.sum(), 3))
            gi[np.arange(len(axis)), axis] = sgn
            g[inside] = gi
        return d, g


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float
    id: str = "sphere"

    def sdf(self, pts):
        rel = pts - self.center
        n = np.linalg.norm(rel, axis=1)
        d = n - self.radius
        g = np.zeros_like(pts)
        ok = n > 1e-12
        g[ok] = rel[ok] / n[ok, None]
        g[~ok] = [0.0, 0.0, 1.0]
        return d, g


@dataclass(frozen=True)
class VCylinder:
    """Vertical cylinder over a z-range (static column)."""

    center_xy: np.ndarray
    radius: float
    zmin: float
    zmax: float
    id: str = "cylinder"

    def sdf(self, pts):
        rel = pts[:, 0:2] - self.center_xy
        rho = np.linalg.norm(rel, axis=1)
        dxy = rho - self.radius
        dz = np.maximum(self.zmin - pts[:, 2], pts[:, 2] - self.zmax)

        out_xy = np.maximum(dxy, 0.0)
        out_z = np.maximum(dz, 0.0)
        d_out = np.hypot(out_xy, out_z)
        d = d_out + np.minimum(np.maximum(dxy, dz), 0.0)

        radial = np.zeros_like(rel)
        ok = rho > 1e-12
        radial[ok] = rel[ok] / rho[ok, None]
        radial[~ok] = [1.0, 0.0]
        zsign = np.where(pts[:, 2] >= 0.5 * (self.zmin + self.zmax), 1.0, -1.0)

        g = np.zeros_like(pts)
        outside = d_out > 0.0
        if np.any(outside):
            w_xy = out_xy[outside] / d_out[outside]
            w_z = out_z[outside] / d_out[outside]
            g[outside, 0:2] = radial[outside] * w_xy[:, None]
            g[outside, 2] = zsign[outside] * w_z
        inside = ~outside
        if np.any(inside):
            use_xy = dxy[inside] >= dz[inside]
            gi = np.zeros((int(inside.sum()), 3))
            gi[use_xy, 0:2] = radial[inside][use_xy]
            gi[~use_xy, 2] = zsign[inside][~use_xy]
            g[inside] = gi
        return d, g


@dataclass
class PrimitiveScene:
    """Union of primitives; at least a floor is required."""

    primitives: list = field(default_factory=list)

    def __post_init__(self):
        if not any(isinstance(p, Floor) for p in self.primitives):
            raise ConfigError("every scene needs a floor primitive")
        ids = [p.id for p in self.primitives]
        if len(set(ids)) != len(ids):
            raise ConfigError("primitive ids must be unique")
        for p in self.primitives:
            if isinstance(p, Box):
                if not np.all(np.asarray(p.lo) < np.asarray(p.hi)):
                    raise ConfigError(f"box {p.id}: min corner must be below max")
            if isinstance(p, (Sphere, VCylinder)) and p.radius <= 0.0:
                raise ConfigError(f"{p.id}: radius must be positive")
            if isinstance(p, VCylinder) and p.zmin >= p.zmax:
                raise ConfigError(f"{p.id}: zmin must be below zmax")

    def sdf(self, pts):
        """Signed distance and gradient of the scene at points (N, 3)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        best_d = np.full(len(pts), np.inf)
        best_g = np.zeros_like(pts)
        for prim in self.primitives:
            d, g = prim.sdf(pts)
            closer = d < best_d
            best_d[closer] = d[closer]
            best_g[closer] = g[closer]
        return best_d, best_g


def analytic_sdf(scene, point):
    """Exact signed distance and unit gradient of the scene at one point."""
    d, g = scene.sdf(np.asarray(point, dtype=float)[None, :])
    return float(d[0]), g[0]


def scene_from_dict(data):
    prims = []
    entries = data.get("primitives", [])
    for i, e in enumerate(entries):
        kind = e.get("type")
        pid = e.get("id", f"{kind}{i}")
        try:
            if kind == "floor":
                prims.append(Floor(z=float(e.get("z", 0.0)), id=pid))
            elif kind == "box":
                prims.append(Box(lo=np.asarray(e["min"], dtype=float),
                                 hi=np.asarray(e["max"], dtype=float), id=pid))
            elif kind == "sphere":
                prims.append(Sphere(center=np.asarray(e["center"], dtype=float),
                                    radius=float(e["radius"]), id=pid))
            elif kind == "cylinder":
                prims.append(VCylinder(center_xy=np.asarray(e["center"], dtype=float)[:2],
                                       radius=float(e["radius"]),
                                       zmin=float(e.get("zmin", 0.0)),
                                       zmax=float(e.get("zmax", 2.0)), id=pid))
            else:
                raise ConfigError(f"unknown primitive type {kind!r}")
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad primitive entry {i}: {exc}") from exc
    return PrimitiveScene(prims)


def load_scene(path):
    with open(path) as f:
        return scene_from_dict(json.load(f))


@dataclass
class EsdfQuery:
    distance: float
    gradient: np.ndarray
    clamped: bool


@dataclass
class Esdf:
    """Voxel grid of distances with precomputed, norm-clipped gradients.

    Arrays are float32 with shape (nz, ny, nx) so the linear (ravel) order is
    x-fastest; gradients append a trailing component axis.
    """

    origin: np.ndarray      # center of voxel (0, 0, 0)
    voxel_size: float
    dims: tuple             # (nx, ny, nz)
    distance: np.ndarray    # (nz, ny, nx) float32
    gradient: np.ndarray    # (nz, ny, nx, 3) float32
    build_time: float = 0.0

    def voxel_center(self, i, j, k):
        return self.origin + self.voxel_size * np.array([i, j, k], dtype=float)

    def query(self, point):
        d, g, c = self.query_batch(np.asarray(point, dtype=float)[None, :])
        return EsdfQuery(float(d[0]), g[0], bool(c[0]))

    def query_batch(self, pts):
        """First-order queries at points (N, 3).

        Distance is d_v + g_v . (p - center_v) from the closest voxel center;
        the gradient is the cached one. Out-of-grid points clamp to the
        nearest voxel and extrapolate (clamped flag set).
        """
        pts = np.asarray(pts, dtype=float)
        rel = (pts - self.origin) / self.voxel_size
        idx = np.rint(rel).astype(np.int64)
        hi = np.array(self.dims, dtype=np.int64) - 1
        clamped_idx = np.clip(idx, 0, hi)
        clamped = np.any(idx != clamped_idx, axis=1)
        i, j, k = clamped_idx[:, 0], clamped_idx[:, 1], clamped_idx[:, 2]
        centers = self.origin + self.voxel_size * clamped_idx
        dv = self.distance[k, j, i].astype(float)
        gv = self.gradient[k, j, i].astype(float)
        d = dv + np.einsum("nc,nc->n", gv, pts - centers)
        return d, gv, clamped

    def max_gradient_norm(self):
        return float(np.linalg.norm(self.gradient.astype(float), axis=-1).max())

    def slice_distances(self, z):
        """Distance layer at the voxel plane closest to height z: (ny, nx)."""
        k = int(np.clip(round((z - self.origin[2]) / self.voxel_size),
                        0, self.dims[2] - 1))
        return self.distance[k].astype(float), self.origin[2] + k * self.voxel_size

    def dump(self, path):
        header = _MAGIC + struct.pack(
            "<3dd3Id", *self.origin, self.voxel_size, *self.dims, self.build_time)
        with open(path, "wb") as f:
            f.write(header)
            f.write(self.distance.astype("<f4").tobytes())
            f.write(self.gradient.astype("<f4").tobytes())


def load_esdf(path):
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != _MAGIC:
        raise ConfigError("not an ESDF dump (bad magic)")
    off = 8
    origin = np.array(struct.unpack_from("<3d", blob, off)); off += 24
    voxel = struct.unpack_from("<d", blob, off)[0]; off += 8
    nx, ny, nz = struct.unpack_from("<3I", blob, off); off += 12
    build_time = struct.unpack_from("<d", blob, off)[0]; off += 8
    n = nx * ny * nz
    dist = np.frombuffer(blob, dtype="<f4", count=n, offset=off)
    off += 4 * n
    grad = np.frombuffer(blob, dtype="<f4", count=3 * n, offset=off)
    return Esdf(origin=origin, voxel_size=voxel, dims=(nx, ny, nz),
                distance=dist.reshape(nz, ny, nx).copy(),
                gradient=grad.reshape(nz, ny, nx, 3).copy(),
                build_time=build_time)


def build_esdf(scene, bounds, voxel_size=DEFAULT_VOXEL_SIZE,
               budget=DEFAULT_VOXEL_BUDGET, build_time=None):
    """Sample the scene into a voxel grid and cache clipped gradients.

    bounds = (lo, hi) world corners; voxel centers start half a voxel inside.
    Gradients use central differences (one-sided at borders), then their norm
    is clipped to <= 1, the theoretical limit for a distance field.
    """
    lo = np.asarray(bounds[0], dtype=float)
    hi = np.asarray(bounds[1], dtype=float)
    if np.any(hi <= lo):
        raise ConfigError("bounds must have positive volume")
    if voxel_size <= 0.0:
        raise ConfigError("voxel_size must be positive")
    dims = np.maximum(np.ceil((hi - lo) / voxel_size - 1e-9), 1).astype(int)
    count = int(np.prod(dims))
    if count > budget:
        raise GridTooLarge(f"{count} voxels exceeds budget {budget}")
    nx, ny, nz = int(dims[0]), int(dims[1]), int(dims[2])
    origin = lo + 0.5 * voxel_size

    xs = origin[0] + voxel_size * np.arange(nx)
    ys = origin[1] + voxel_size * np.arange(ny)
    zs = origin[2] + voxel_size * np.arange(nz)
    Z, Y, X = np.meshgrid(zs, ys, xs, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    d, _ = scene.sdf(pts)
    dist = d.reshape(nz, ny, nx)

    # axis order in the array is (z, y, x)
    gx = np.gradient(dist, voxel_size, axis=2)
    gy = np.gradient(dist, voxel_size, axis=1)
    gz = np.gradient(dist, voxel_size, axis=0)
    grad = np.stack([gx, gy, gz], axis=-1)
    norms = np.linalg.norm(grad, axis=-1)
    over = norms > 1.0
    # deflate slightly past 1 so the norm stays <= 1 after the float32 cast
    grad[over] /= norms[over][..., None] * (1.0 + 1e-6)

    return Esdf(origin=origin, voxel_size=float(voxel_size),
                dims=(nx, ny, nz),
                distance=dist.astype(np.float32),
                gradient=grad.astype(np.float32),
                build_time=time.time() if build_time is None else build_time)
