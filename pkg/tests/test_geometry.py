import numpy as np
import pytest

from geometry.cloud import LabeledCloudSet, as_cloud, bbox_diagonal, normalize_cloud
from geometry.density import kde_density, density_cv
from geometry.io import density_colors, read_mesh, read_ply_colors, read_xyz, write_off, write_ply, write_xyz
from geometry.mesh import TriangleMesh, point_in_mesh_surface
from geometry.procedural import SHAPE_CLASSES, ProceduralSpec, gen_procedural_mesh
from geometry.sampling import sample_biased_cluster, sample_fps, sample_mesh_uniform, sample_sphere


def unit_square():
    return TriangleMesh([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], [[0, 1, 2], [0, 2, 3]])


class TestCloud:
    def test_normalize_centers_and_scales(self, rng):
        cloud = rng.normal(size=(200, 3)) * [3.0, 1.0, 0.5] + 7.0
        normalized = normalize_cloud(cloud)
        assert np.allclose(normalized.mean(axis=0), 0.0, atol=1e-12)
        assert bbox_diagonal(normalized) == pytest.approx(1.0)

    def test_normalize_is_idempotent(self, rng):
        once = normalize_cloud(rng.random((64, 3)))
        assert np.allclose(normalize_cloud(once), once, atol=1e-12)

    def test_degenerate_cloud(self):
        with pytest.raises(ValueError, match="degenerate cloud"):
            normalize_cloud(np.ones((10, 3)))

    def test_single_point_is_degenerate(self):
        with pytest.raises(ValueError, match="degenerate cloud"):
            normalize_cloud([[1.0, 2.0, 3.0]])

    @pytest.mark.parametrize("points", [np.zeros((4, 2)), np.zeros((0, 3)), [[0.0, np.nan, 1.0]]])
    def test_as_cloud_rejects(self, points):
        with pytest.raises(ValueError):
            as_cloud(points)

    def test_labeled_set_checks_labels(self):
        with pytest.raises(ValueError, match="not in the label set"):
            LabeledCloudSet(np.zeros((2, 4, 3)), [0, 2], label_set=(0, 1))

    def test_labeled_set_subset_and_concatenate(self):
        a = LabeledCloudSet(np.zeros((3, 4, 3)), [0, 0, 0], mesh_ids=["a", "b", "c"])
        b = LabeledCloudSet(np.ones((2, 4, 3)), [1, 1], mesh_ids=["d", "e"])
        both = LabeledCloudSet.concatenate([a, b], "test")
        assert len(both) == 5 and both.split == "test"
        sub = both.subset([4, 0])
        assert sub.mesh_ids == ["e", "a"]
        assert sub.labels.tolist() == [1, 0]


class TestMesh:
    def test_area(self):
        assert unit_square().area == pytest.approx(1.0)

    def test_rejects_bad_indices(self):
        with pytest.raises(ValueError):
            TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 3]])

    def test_rejects_zero_area(self):
        with pytest.raises(ValueError, match="zero surface area"):
            TriangleMesh([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]])

    def test_off_round_trip(self, tmp_path, box_mesh):
        path = str(tmp_path / "box.off")
        write_off(path, box_mesh)
        mesh = read_mesh(path)
        assert np.array_equal(mesh.vertices, box_mesh.vertices)
        assert np.array_equal(mesh.faces, box_mesh.faces)

    def test_obj_quads_are_fanned(self, tmp_path):
        path = tmp_path / "quad.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 4/4\n")
        mesh = read_mesh(str(path))
        assert mesh.faces.tolist() == [[0, 1, 2], [0, 2, 3]]
        assert mesh.area == pytest.approx(1.0)


class TestSampling:
    def test_uniform_points_lie_on_surface(self, rng, chair_mesh):
        cloud = sample_mesh_uniform(chair_mesh, 64, rng)
        assert cloud.shape == (64, 3)
        assert all(point_in_mesh_surface(chair_mesh, p, tol=1e-7) for p in cloud)

    def test_uniform_is_area_weighted(self, rng):
        # left triangle has 3x the area of the right one
        mesh = TriangleMesh([[0, 0, 0], [3, 0, 0], [0, 1, 0], [3, 0, 0], [4, 0, 0], [3, 1, 0]],
                            [[0, 1, 2], [3, 4, 5]])
        cloud = sample_mesh_uniform(mesh, 20000, rng)
        assert np.mean(cloud[:, 0] < 3.0) == pytest.approx(0.75, abs=0.02)

    def test_uniform_is_seeded(self, box_mesh):
        a = sample_mesh_uniform(box_mesh, 32, np.random.default_rng(9))
        b = sample_mesh_uniform(box_mesh, 32, np.random.default_rng(9))
        assert np.array_equal(a, b)

    def test_fps_matches_greedy_definition(self, rng):
        cloud = rng.random((60, 3))
        points, indices = sample_fps(cloud, 12, start=0, return_indices=True)
        assert len(set(indices.tolist())) == 12
        chosen = [0]
        for _ in range(11):
            dist = np.min(np.linalg.norm(cloud[:, None] - cloud[chosen][None], axis=-1), axis=1)
            chosen.append(int(np.argmax(dist)))
        assert indices.tolist() == chosen
        assert np.array_equal(points, cloud[chosen])

    def test_fps_full_set_is_permutation(self, rng):
        cloud = rng.random((16, 3))
        _, indices = sample_fps(cloud, 16, return_indices=True)
        assert sorted(indices.tolist()) == list(range(16))

    def test_fps_ties_take_lowest_index(self):
        cloud = np.array([[0, 0, 0], [1, 0, 0], [-1, 0, 0], [0, 0, 0.5]], dtype=float)
        _, indices = sample_fps(cloud, 2, start=0, return_indices=True)
        assert indices.tolist() == [0, 1]

    @pytest.mark.parametrize("k", [0, 11])
    def test_fps_rejects_k(self, rng, k):
        with pytest.raises(ValueError):
            sample_fps(rng.random((10, 3)), k)

    def test_biased_cluster(self, rng, chair_mesh):
        cloud, anchor = sample_biased_cluster(chair_mesh, 256, 256, 0.1, rng, return_anchor=True)
        assert cloud.shape == (512, 3)
        assert np.all(np.linalg.norm(cloud[256:] - anchor, axis=1) <= 0.1 + 1e-12)
        assert point_in_mesh_surface(chair_mesh, anchor, tol=1e-7)

    def test_biased_cluster_needs_rng(self, chair_mesh):
        with pytest.raises(ValueError):
            sample_biased_cluster(chair_mesh, 8, 8, 0.1)

    def test_sphere(self, rng):
        points = sample_sphere(500, rng)
        assert np.allclose(np.linalg.norm(points, axis=1), 1.0)
        assert np.abs(points.mean(axis=0)).max() < 0.15


class TestDensity:
    def test_counts_match_brute_force(self, rng):
        cloud = rng.random((80, 3))
        field = kde_density(cloud, 0.3)
        expected = [sum(np.linalg.norm(p - q) <= 0.3 for q in cloud) for p in cloud]
        assert field.values.tolist() == expected
        assert field.values.min() >= 1

    def test_kdtree_path_agrees(self, rng):
        cloud = rng.random((1500, 3))
        big = kde_density(cloud, 0.1).values
        diff = cloud[:, None, :] - cloud[None, :, :]
        brute = np.sum(np.sqrt(np.sum(diff * diff, axis=-1)) <= 0.1, axis=1)
        assert np.array_equal(big, brute)

    def test_biased_clouds_are_less_uniform(self, rng, chair_mesh):
        uniform = sample_mesh_uniform(chair_mesh, 1024, rng)
        biased = sample_biased_cluster(chair_mesh, 512, 512, 0.1, rng)
        assert density_cv(kde_density(biased)) > density_cv(kde_density(uniform))

    def test_rejects_bandwidth(self, rng):
        with pytest.raises(ValueError):
            kde_density(rng.random((5, 3)), 0.0)


class TestProcedural:
    @pytest.mark.parametrize("shape_class", SHAPE_CLASSES)
    def test_meshes_are_normalized(self, shape_class):
        mesh = gen_procedural_mesh(ProceduralSpec(shape_class, seed=1))
        extent = mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0)
        assert np.linalg.norm(extent) == pytest.approx(1.0)
        assert mesh.area > 0

    def test_same_seed_same_mesh(self):
        a = gen_procedural_mesh(ProceduralSpec("table", seed=7))
        b = gen_procedural_mesh(ProceduralSpec("table", seed=7))
        assert np.array_equal(a.vertices, b.vertices)

    def test_fixed_ranges_ignore_seed(self):
        ranges = {"radius": (0.3, 0.3), "height": (1.0, 1.0)}
        a = gen_procedural_mesh(ProceduralSpec("cylinder", ranges, seed=1))
        b = gen_procedural_mesh(ProceduralSpec("cylinder", ranges, seed=2))
        assert np.array_equal(a.vertices, b.vertices)

    def test_chair_parts(self):
        four = gen_procedural_mesh(ProceduralSpec("chair", {"legs": (4, 4)}))
        three = gen_procedural_mesh(ProceduralSpec("chair", {"legs": (3, 3)}))
        assert four.connected_components() == 6
        assert three.connected_components() == 5

    def test_alias(self):
        assert ProceduralSpec("chair-composite").shape_class == "chair"

    @pytest.mark.parametrize("kwargs", [
        {"shape_class": "teapot"},
        {"shape_class": "box", "ranges": {"radius": (0.1, 0.2)}},
        {"shape_class": "box", "ranges": {"width": (0.5, 0.1)}},
        {"shape_class": "chair", "ranges": {"legs": (2, 4)}},
    ])
    def test_invalid_specs(self, kwargs):
        with pytest.raises(ValueError):
            ProceduralSpec(**kwargs)


class TestIO:
    def test_xyz_round_trip_is_exact(self, tmp_path, rng):
        cloud = rng.normal(size=(50, 3))
        path = str(tmp_path / "cloud.xyz")
        write_xyz(path, cloud)
        assert np.array_equal(read_xyz(path), cloud)

    def test_xyz_skips_blank_lines(self, tmp_path):
        path = tmp_path / "blank.xyz"
        path.write_text("0 0 0\n\n1 2 3\n")
        assert read_xyz(str(path)).shape == (2, 3)

    def test_xyz_malformed_line(self, tmp_path):
        path = tmp_path / "bad.xyz"
        path.write_text("0 0 0\n1 2\n")
        with pytest.raises(ValueError, match=":2:"):
            read_xyz(str(path))

    def test_density_ply(self, tmp_path, rng):
        cloud = rng.random((100, 3))
        field = kde_density(cloud, 0.2)
        colors = density_colors(field)
        path = str(tmp_path / "cloud.ply")
        write_ply(path, cloud, colors)
        points, read_colors = read_ply_colors(path)
        assert np.array_equal(points, cloud)
        assert np.array_equal(read_colors, colors)
        sparse, dense = np.argmin(field.values), np.argmax(field.values)
        # sparse points are dark blue, dense ones light yellow
        assert colors[sparse, 2] > colors[sparse, 0]
        assert colors[dense, 0] > colors[dense, 2]
        assert colors[dense].sum() > colors[sparse].sum()
