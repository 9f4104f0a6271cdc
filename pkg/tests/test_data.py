import numpy as np
import pytest

from lutimlp import data


def test_synth_shapes_deterministic_and_labeled():
    a = data.synth_shapes(seed=5, n_per_class=3, n_points=64)
    b = data.synth_shapes(seed=5, n_per_class=3, n_points=64)
    c = data.synth_shapes(seed=6, n_per_class=3, n_points=64)
    assert len(a) == 8 * 3
    assert [cl.label for cl in a] == [cl.label for cl in b]
    for ca, cb in zip(a, b):
        assert np.array_equal(ca.points, cb.points)
    assert any(not np.array_equal(ca.points, cc.points)
               for ca, cc in zip(a, c))
    labels = sorted({cl.label for cl in a})
    assert labels == list(range(8))
    for cl in a:
        assert cl.points.shape == (64, 3)


def test_synth_shapes_are_normalized():
    clouds = data.synth_shapes(seed=1, n_per_class=2, n_points=128)
    for cl in clouds:
        radii = np.linalg.norm(cl.points, axis=1)
        assert radii.max() == pytest.approx(1.0, abs=1e-9)


def test_sphere_class_lies_near_unit_shell():
    clouds = data.synth_shapes(seed=2, n_per_class=2, n_points=256)
    sphere = [cl for cl in clouds if cl.label == 0][0]
    radii = np.linalg.norm(sphere.points, axis=1)
    # jitter plus centroid/max-radius normalization spreads the shell
    assert np.abs(radii - 1.0).max() < 0.25
    assert radii.min() > 0.5


def test_class_geometries_differ():
    clouds = data.synth_shapes(seed=3, n_per_class=1, n_points=512)
    by_label = {cl.label: cl.points for cl in clouds}
    # radial spread separates a shell from a solid-ish shape
    sph = np.linalg.norm(by_label[0], axis=1).std()
    cube = np.linalg.norm(by_label[1], axis=1).std()
    assert sph < cube


def test_normalize_unit_sphere_centers_and_scales():
    rng = np.random.default_rng(4)
    pts = rng.normal(3.0, 2.0, (100, 3))
    cloud = data.normalize_unit_sphere(data.PointCloud(pts, 0))
    assert np.abs(cloud.points.mean(axis=0)).max() < 1e-12
    assert np.linalg.norm(cloud.points, axis=1).max() == pytest.approx(1.0)
    again = data.normalize_unit_sphere(cloud)
    assert np.abs(again.points - cloud.points).max() < 1e-12


def test_normalize_degenerate_cloud_maps_to_origin():
    pts = np.tile([2.0, -1.0, 3.0], (5, 1))
    cloud = data.normalize_unit_sphere(data.PointCloud(pts, 1))
    assert np.array_equal(cloud.points, np.zeros((5, 3)))


def test_sample_n_without_replacement_when_possible():
    rng = np.random.default_rng(5)
    cloud = data.PointCloud(rng.normal(0, 1, (50, 3)), 2)
    sub = data.sample_n(cloud, 20, seed=0)
    assert sub.points.shape == (20, 3)
    assert sub.label == 2
    # all sampled rows are distinct source rows
    joined = {tuple(r) for r in sub.points}
    assert len(joined) == 20
    assert np.array_equal(sub.points, data.sample_n(cloud, 20, seed=0).points)
    assert not np.array_equal(sub.points,
                              data.sample_n(cloud, 20, seed=1).points)


def test_sample_n_with_replacement_when_short():
    rng = np.random.default_rng(6)
    cloud = data.PointCloud(rng.normal(0, 1, (10, 3)), 0)
    sub = data.sample_n(cloud, 32, seed=3)
    assert sub.points.shape == (32, 3)
    src = {tuple(r) for r in cloud.points}
    assert all(tuple(r) in src for r in sub.points)


def test_load_xyz_roundtrip(tmp_path):
    rng = np.random.default_rng(7)
    pts = rng.normal(0, 1, (17, 3))
    path = tmp_path / "cloud.xyz"
    with open(path, "w") as fh:
        for p in pts:
            fh.write(" ".join(repr(float(v)) for v in p) + "\n")
    cloud = data.load_xyz(path)
    assert np.array_equal(cloud.points, pts)


def test_load_xyz_reports_bad_line_number(tmp_path):
    path = tmp_path / "bad.xyz"
    path.write_text("0 0 0\n1 1 1\nnot a point\n")
    with pytest.raises(data.ParseError) as err:
        data.load_xyz(path)
    assert "3" in str(err.value)
    path.write_text("0 0\n")
    with pytest.raises(data.ParseError):
        data.load_xyz(path)
    path.write_text("")
    with pytest.raises(data.ParseError):
        data.load_xyz(path)


OFF_BASIC = """OFF
4 1 0
0.0 0.0 0.0
1.0 0.0 0.0
0.0 1.0 0.0
0.0 0.0 1.0
3 0 1 2
"""

OFF_HEADER_COUNTS = """OFF 4 1 0
0.0 0.0 0.0
1.0 0.0 0.0
0.0 1.0 0.0
0.0 0.0 1.0
3 0 1 2
"""

OFF_COMMENTS = """OFF
# a comment
4 0 0
0.0 0.0 0.0
1.0 0.0 0.0
# another
0.0 1.0 0.0
0.0 0.0 1.0
"""


@pytest.mark.parametrize("text", [OFF_BASIC, OFF_HEADER_COUNTS, OFF_COMMENTS])
def test_load_off_variants(tmp_path, text):
    path = tmp_path / "mesh.off"
    path.write_text(text)
    cloud = data.load_off(path)
    assert cloud.points.shape == (4, 3)
    assert np.array_equal(cloud.points[1], [1.0, 0.0, 0.0])


def test_load_off_tolerates_extra_vertex_fields(tmp_path):
    path = tmp_path / "mesh.off"
    path.write_text("OFF\n2 0 0\n0 0 0 255 0 0\n1 2 3 0 255 0\n")
    cloud = data.load_off(path)
    assert np.array_equal(cloud.points, [[0, 0, 0], [1, 2, 3]])


def test_load_off_errors(tmp_path):
    path = tmp_path / "mesh.off"
    path.write_text("OFX\n1 0 0\n0 0 0\n")
    with pytest.raises(data.ParseError):
        data.load_off(path)
    path.write_text("OFF\n3 0 0\n0 0 0\n1 1 1\n")  # fewer vertices than count
    with pytest.raises(data.ParseError):
        data.load_off(path)
    path.write_text("OFF\n")
    with pytest.raises(data.ParseError):
        data.load_off(path)


def test_parsers_survive_fuzzed_input(tmp_path):
    rng = np.random.default_rng(8)
    path = tmp_path / "fuzz.bin"
    base = OFF_BASIC.encode()
    for trial in range(60):
        if trial % 3 == 0:
            blob = rng.bytes(int(rng.integers(0, 200)))
        elif trial % 3 == 1:
            blob = base[: int(rng.integers(0, len(base)))]
        else:
            mutated = bytearray(base)
            for _ in range(4):
                mutated[int(rng.integers(0, len(mutated)))] = int(
                    rng.integers(0, 256))
            blob = bytes(mutated)
        path.write_bytes(blob)
        for loader in (data.load_off, data.load_xyz):
            try:
                cloud = loader(path)
                assert cloud.points.ndim == 2  # parsed fine
            except data.ParseError:
                pass  # rejected cleanly
