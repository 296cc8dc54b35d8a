import numpy as np
import pytest
from scipy.spatial import cKDTree

from cfmpc import sdf
from cfmpc.errors import ConfigError, GridTooLarge
from cfmpc.sdf import (
    Box,
    Esdf,
    Floor,
    PrimitiveScene,
    Sphere,
    VCylinder,
    analytic_sdf,
    build_esdf,
    load_esdf,
    scene_from_dict,
)


@pytest.fixture(scope="module")
def test_scene():
    return PrimitiveScene([
        Floor(z=0.0),
        Box(lo=np.array([1.0, -0.5, 0.0]), hi=np.array([1.6, 0.5, 1.2]), id="box0"),
        Sphere(center=np.array([-1.2, 0.8, 0.6]), radius=0.4, id="ball"),
        VCylinder(center_xy=np.array([0.0, -1.5]), radius=0.3,
                  zmin=0.0, zmax=1.8, id="col"),
    ])


def surface_samples(scene, spacing=0.01, extent=3.3):
    """Quasi-uniform point samples on every primitive surface.

    Structured grids with spacing s bound the tangential offset of the
    nearest sample by s/sqrt(2), so the nearest-sample distance overestimates
    the true distance by at most sqrt(d^2 + s^2/2) - d (oracle support).
    """
    pts = []

    def grid1(a, b):
        n = max(2, int(np.ceil((b - a) / spacing)) + 1)
        return np.linspace(a, b, n)

    def fib_sphere(n):
        i = np.arange(n) + 0.5
        phi = np.arccos(1 - 2 * i / n)
        golden = np.pi * (1 + 5 ** 0.5)
        ang = golden * i
        return np.column_stack([np.cos(ang) * np.sin(phi),
                                np.sin(ang) * np.sin(phi), np.cos(phi)])

    def fib_disk(n, radius):
        i = np.arange(n) + 0.5
        r = radius * np.sqrt(i / n)
        ang = np.pi * (1 + 5 ** 0.5) * i
        return np.column_stack([r * np.cos(ang), r * np.sin(ang)])

    for p in scene.primitives:
        if isinstance(p, Floor):
            X, Y = np.meshgrid(grid1(-extent, extent), grid1(-extent, extent))
            pts.append(np.column_stack([X.ravel(), Y.ravel(),
                                        np.full(X.size, p.z)]))
        elif isinstance(p, Sphere):
            n = max(64, int(np.ceil(4 * np.pi * p.radius ** 2 / spacing ** 2)))
            pts.append(p.center + p.radius * fib_sphere(n))
        elif isinstance(p, Box):
            gx, gy, gz = (grid1(p.lo[a], p.hi[a]) for a in range(3))
            for axis, (g1, g2) in zip(range(3), [(gy, gz), (gx, gz), (gx, gy)]):
                A, B = np.meshgrid(g1, g2)
                for side in (p.lo[axis], p.hi[axis]):
                    face = np.empty((A.size, 3))
                    face[:, axis] = side
                    others = [a for a in range(3) if a != axis]
                    face[:, others[0]] = A.ravel()
                    face[:, others[1]] = B.ravel()
                    pts.append(face)
        elif isinstance(p, VCylinder):
            n_ang = max(8, int(np.ceil(2 * np.pi * p.radius / spacing)))
            ang = np.linspace(0, 2 * np.pi, n_ang, endpoint=False)
            zs = grid1(p.zmin, p.zmax)
            A, Z = np.meshgrid(ang, zs)
            pts.append(np.column_stack([
                p.center_xy[0] + p.radius * np.cos(A.ravel()),
                p.center_xy[1] + p.radius * np.sin(A.ravel()), Z.ravel()]))
            n_cap = max(64, int(np.ceil(np.pi * p.radius ** 2 / spacing ** 2)))
            disk = fib_disk(n_cap, p.radius)
            for zc in (p.zmin, p.zmax):
                pts.append(np.column_stack([
                    p.center_xy[0] + disk[:, 0],
                    p.center_xy[1] + disk[:, 1],
                    np.full(len(disk), zc)]))
    return np.vstack(pts)


def inside_any(scene, pts):
    inside = np.zeros(len(pts), dtype=bool)
    for p in scene.primitives:
        if isinstance(p, Floor):
            inside |= pts[:, 2] < p.z
        elif isinstance(p, Sphere):
            inside |= np.linalg.norm(pts - p.center, axis=1) < p.radius
        elif isinstance(p, Box):
            inside |= np.all((pts > p.lo) & (pts < p.hi), axis=1)
        elif isinstance(p, VCylinder):
            inside |= ((np.linalg.norm(pts[:, :2] - p.center_xy, axis=1) < p.radius)
                       & (pts[:, 2] > p.zmin) & (pts[:, 2] < p.zmax))
    return inside


def test_sphere_sdf_exact():
    scene = PrimitiveScene([Floor(z=-10.0), Sphere(center=np.zeros(3), radius=0.5)])
    d, g = analytic_sdf(scene, [2.0, 0.0, 0.0])
    assert d == pytest.approx(1.5)
    assert np.allclose(g, [1.0, 0.0, 0.0])


def test_point_on_box_face():
    scene = PrimitiveScene([Floor(z=-10.0),
                            Box(lo=np.array([0, 0, 0.]), hi=np.array([1, 1, 1.]))])
    d, _ = analytic_sdf(scene, [0.5, 0.5, 1.0])
    assert d == pytest.approx(0.0, abs=1e-12)


def test_analytic_sdf_vs_brute_force(test_scene):
    """10^4 random points against dense surface sampling (KD-tree oracle).

    The structured sampling grid (spacing s = 0.01) bounds the oracle's own
    bias by sqrt(d^2 + s^2/2) - d, which stays below 1e-3 for |d| >= 0.03;
    queries closer to a surface than that are filtered by the oracle value.
    """
    rng = np.random.default_rng(42)
    samples = surface_samples(test_scene)
    tree = cKDTree(samples)
    pts = rng.uniform([-3, -3, -0.5], [3, 3, 2.0], (10_000, 3))
    d_oracle, _ = tree.query(pts, workers=-1)
    sign = np.where(inside_any(test_scene, pts), -1.0, 1.0)
    d_oracle = d_oracle * sign
    keep = np.abs(d_oracle) >= 0.03
    assert keep.sum() > 9000
    d, _ = test_scene.sdf(pts)
    assert np.abs(d[keep] - d_oracle[keep]).max() < 1e-3


def test_analytic_gradient_is_unit_and_fd_consistent(test_scene):
    rng = np.random.default_rng(1)
    pts = rng.uniform([-3, -3, 0.1], [3, 3, 2.0], (200, 3))
    d, g = test_scene.sdf(pts)
    away = np.abs(d) > 0.05  # keep clear of surfaces and medial axes
    assert np.abs(np.linalg.norm(g[away], axis=1) - 1.0).max() < 1e-9
    h = 1e-6
    for p, gi in zip(pts[away][:50], g[away][:50]):
        fd = np.array([
            (analytic_sdf(test_scene, p + h * e)[0]
             - analytic_sdf(test_scene, p - h * e)[0]) / (2 * h)
            for e in np.eye(3)])
        assert np.abs(fd - gi).max() < 1e-5


def test_build_floor_only_heights():
    scene = PrimitiveScene([Floor(z=0.0)])
    grid = build_esdf(scene, ([0, 0, 0], [1, 1, 1]), voxel_size=0.1)
    for k in range(grid.dims[2]):
        h = grid.origin[2] + k * grid.voxel_size
        assert np.abs(grid.distance[k] - h).max() < 1e-6


def test_gradient_norm_clipped(test_scene):
    grid = build_esdf(test_scene, ([-2, -2, -0.2], [2, 2, 2]), voxel_size=0.1)
    assert grid.max_gradient_norm() <= 1.0 + 1e-12


def test_grid_samples_analytic_sdf(test_scene):
    """Construction is sampling: voxel distances equal the analytic SDF."""
    grid = build_esdf(test_scene, ([-1, -1, 0], [1, 1, 1]), voxel_size=0.25)
    nx, ny, nz = grid.dims
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                c = grid.voxel_center(i, j, k)
                d, _ = analytic_sdf(test_scene, c)
                assert grid.distance[k, j, i] == pytest.approx(d, abs=1e-6)


def test_grid_too_large():
    scene = PrimitiveScene([Floor(z=0.0)])
    with pytest.raises(GridTooLarge):
        build_esdf(scene, ([0, 0, 0], [100, 100, 100]), voxel_size=0.01)


def test_query_at_voxel_center_bit_exact(test_scene):
    grid = build_esdf(test_scene, ([-2, -2, 0], [2, 2, 1.5]), voxel_size=0.1)
    rng = np.random.default_rng(3)
    for _ in range(100):
        i = rng.integers(0, grid.dims[0])
        j = rng.integers(0, grid.dims[1])
        k = rng.integers(0, grid.dims[2])
        res = grid.query(grid.voxel_center(i, j, k))
        assert res.distance == float(grid.distance[k, j, i])
        assert not res.clamped


def test_query_planar_field_first_order():
    scene = PrimitiveScene([Floor(z=0.0)])
    grid = build_esdf(scene, ([0, 0, 0], [1, 1, 2]), voxel_size=0.1)
    res = grid.query([0.5, 0.5, 1.234])
    assert res.distance == pytest.approx(1.234, abs=grid.voxel_size)
    assert np.allclose(res.gradient, [0, 0, 1], atol=1e-6)


def test_query_against_analytic(test_scene):
    """First-order queries track the analytic SDF within 1.5 voxel."""
    voxel = 0.10
    grid = build_esdf(test_scene, ([-2.5, -2.5, -0.2], [2.5, 2.5, 2.0]),
                      voxel_size=voxel)
    rng = np.random.default_rng(9)
    pts = rng.uniform([-2.4, -2.4, -0.1], [2.4, 2.4, 1.9], (10_000, 3))
    d_q, _, clamped = grid.query_batch(pts)
    d_a, _ = test_scene.sdf(pts)
    assert not clamped.any()
    far = d_a > 2 * voxel
    assert np.abs(d_q[far] - d_a[far]).max() <= 1.5 * voxel
    assert np.abs(d_q - d_a).max() <= 1.5 * voxel


def test_out_of_bounds_clamped_flag(test_scene):
    grid = build_esdf(test_scene, ([-1, -1, 0], [1, 1, 1]), voxel_size=0.2)
    res = grid.query([5.0, 0.0, 0.5])
    assert res.clamped
    res_in = grid.query([0.0, 0.0, 0.5])
    assert not res_in.clamped


def test_lipschitz_between_adjacent_voxels(test_scene):
    grid = build_esdf(test_scene, ([-2, -2, 0], [2, 2, 1.5]), voxel_size=0.1)
    d = grid.distance.astype(float)
    h = grid.voxel_size
    for axis in range(3):
        diff = np.abs(np.diff(d, axis=axis))
        assert diff.max() <= h + h  # ||a-b|| + voxel_size


def test_refinement_convergence(test_scene):
    """Halving the voxel size shrinks the max query error (median >= 1.5x)."""
    rng = np.random.default_rng(17)
    pts = rng.uniform([-1.8, -1.8, 0.1], [1.8, 1.8, 1.6], (400, 3))
    d_a, _ = test_scene.sdf(pts)
    errors = []
    for voxel in (0.2, 0.1, 0.05):
        grid = build_esdf(test_scene, ([-2, -2, -0.2], [2, 2, 2]), voxel_size=voxel)
        d_q, _, _ = grid.query_batch(pts)
        errors.append(np.abs(d_q - d_a).max())
    ratios = [errors[i] / errors[i + 1] for i in range(2)]
    assert np.median(ratios) >= 1.5


def test_gradient_direction_increases_distance(test_scene):
    """Stepping along the returned gradient in free space never decreases the
    queried distance (up to one voxel of travel).

    Points near a medial surface are excluded: there the nearest obstacle
    switches within the step, and even an exact SDF decreases along the old
    gradient direction. The runner-up obstacle must stay >= 0.25 m farther
    (one step + two voxels of slack) for the property to be well posed.
    """
    grid = build_esdf(test_scene, ([-2, -2, 0], [2, 2, 1.5]), voxel_size=0.1)
    rng = np.random.default_rng(23)
    pts = rng.uniform([-1.8, -1.8, 0.2], [1.8, 1.8, 1.3], (2000, 3))
    d0, g, _ = grid.query_batch(pts)

    per = np.array([p.sdf(pts)[0] for p in test_scene.primitives])
    per.sort(axis=0)
    medial_margin = per[1] - per[0]
    keep = (d0 > 0.15) & (medial_margin > 0.25)
    assert keep.sum() > 500
    for s in (0.02, 0.05, 0.1):
        d1, _, _ = grid.query_batch(pts[keep] + s * g[keep])
        assert (d1 - d0[keep]).min() >= -1e-9


def test_dump_roundtrip_bit_exact(test_scene, tmp_path):
    grid = build_esdf(test_scene, ([-1, -1, 0], [1, 1, 1]), voxel_size=0.1,
                      build_time=12.5)
    path = tmp_path / "grid.esdf"
    grid.dump(path)
    loaded = load_esdf(path)
    assert loaded.dims == grid.dims
    assert loaded.build_time == 12.5
    assert np.array_equal(loaded.distance, grid.distance)
    assert np.array_equal(loaded.gradient, grid.gradient)
    rng = np.random.default_rng(4)
    pts = rng.uniform([-1, -1, 0], [1, 1, 1], (200, 3))
    d0, g0, c0 = grid.query_batch(pts)
    d1, g1, c1 = loaded.query_batch(pts)
    assert np.array_equal(d0, d1)
    assert np.array_equal(g0, g1)
    assert np.array_equal(c0, c1)


def test_scene_validation():
    with pytest.raises(ConfigError):
        PrimitiveScene([])  # no floor
    with pytest.raises(ConfigError):
        PrimitiveScene([Floor(z=0), Sphere(center=np.zeros(3), radius=-1.0)])
    with pytest.raises(ConfigError):
        PrimitiveScene([Floor(z=0),
                        Box(lo=np.array([1, 0, 0.]), hi=np.array([0, 1, 1.]))])
    with pytest.raises(ConfigError):
        PrimitiveScene([Floor(z=0, id="a"), Floor(z=1, id="a")])


def test_scene_from_dict_roundtrip():
    data = {"primitives": [
        {"type": "floor", "z": 0.0},
        {"type": "box", "min": [0, 0, 0], "max": [1, 1, 1]},
        {"type": "sphere", "center": [2, 2, 0.5], "radius": 0.3},
        {"type": "cylinder", "center": [1, -1], "radius": 0.25, "zmin": 0, "zmax": 2},
    ]}
    scene = scene_from_dict(data)
    assert len(scene.primitives) == 4
    with pytest.raises(ConfigError):
        scene_from_dict({"primitives": [{"type": "wedge"}]})


def test_slice_distances(test_scene):
    grid = build_esdf(test_scene, ([-1, -1, 0], [1, 1, 1.5]), voxel_size=0.1)
    layer, z_actual = grid.slice_distances(0.75)
    assert layer.shape == (grid.dims[1], grid.dims[0])
    assert abs(z_actual - 0.75) <= grid.voxel_size / 2 + 1e-9
