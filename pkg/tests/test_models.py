import numpy as np
import pytest

from autodiff import functional as F
from autodiff.penalty import gradient_penalty
from autodiff.tensor import Tape, Tensor, backward
from geometry.sampling import sample_sphere
from models.attention import attention_block
from models.dgcnn import EdgeConv, edge_features, knn
from models.networks import Discriminator, init_network
from models.pointnet import pool
from models.spec import DISCRIMINATOR_KINDS, NetworkSpec, layer_dims
from models.weights import WeightBlob, WeightFileError, init_weights, load_network, load_weights, save_weights


def small(kind, **kwargs):
    return NetworkSpec(kind, width=kwargs.pop("width", 0.0625), **kwargs)


class TestSpec:
    def test_full_width_dims(self):
        assert layer_dims(NetworkSpec("pointnet-max")) == {"encoder": [3, 64, 128, 1024], "head": [1024, 512, 1]}
        assert layer_dims(NetworkSpec("pointnet-mix"))["head"] == [2048, 512, 1]
        assert layer_dims(NetworkSpec("pointnet-max-2048"))["head"] == [2048, 512, 1]
        assert layer_dims(NetworkSpec("dgcnn"))["head"] == [2048, 512, 256, 1]
        assert layer_dims(NetworkSpec("fc-generator"))["mlp"] == [512, 512, 512, 512, 2048, 6144]
        attention = layer_dims(NetworkSpec("attention-max"))
        assert attention["stem"] == [3, 32, 64] and attention["post"] == [64, 256, 1024]
        assert layer_dims(NetworkSpec("pugan-attention"))["k"] == [128, 128]

    def test_feature_dim(self):
        assert NetworkSpec("feature-extractor", backbone="pointnet-max").feature_dim == 1024
        assert NetworkSpec("feature-extractor", backbone="pointnet-mix").feature_dim == 2048
        assert NetworkSpec("feature-extractor", backbone="dgcnn").feature_dim == 2048

    @pytest.mark.parametrize("kwargs", [
        {"kind": "resnet"},
        {"kind": "pointnet-max", "width": 0},
        {"kind": "feature-extractor"},
        {"kind": "attention-max", "attention": "sparse"},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            NetworkSpec(**kwargs)

    def test_fingerprint_tracks_fields(self):
        assert NetworkSpec("dgcnn", k=20).fingerprint() == NetworkSpec("dgcnn", k=20).fingerprint()
        assert NetworkSpec("dgcnn", k=20).fingerprint() != NetworkSpec("dgcnn", k=10).fingerprint()


class TestNetworks:
    @pytest.mark.parametrize("kind", DISCRIMINATOR_KINDS)
    def test_scores_in_unit_interval(self, rng, kind):
        network = init_network(small(kind, k=4), rng)
        scores = network(rng.random((3, 32, 3)) - 0.5).data
        assert scores.shape == (3,)
        assert np.all((scores > 0) & (scores < 1))

    @pytest.mark.parametrize("kind", ["pointnet-max", "pointnet-avg", "pointnet-mix", "attention-mix", "dgcnn"])
    def test_permutation_invariance(self, rng, kind):
        network = init_network(small(kind, k=4), rng).eval()
        cloud = rng.random((1, 40, 3))
        shuffled = cloud[:, rng.permutation(40)]
        assert np.allclose(network.logits(cloud).data, network.logits(shuffled).data, atol=1e-12)

    def test_single_cloud(self, rng):
        network = init_network(small("pointnet-max"), rng)
        assert network.logits(rng.random((16, 3))).shape == ()

    def test_init_is_seeded_and_bounded(self):
        spec = small("pointnet-max")
        a = init_network(spec, np.random.default_rng(4)).state_dict()
        b = init_network(spec, np.random.default_rng(4)).state_dict()
        assert all(np.array_equal(a[k], b[k]) for k in a)
        weight = a["encoder.mlp.layer1.weight"]
        assert np.abs(weight).max() <= np.sqrt(3.0) / np.sqrt(weight.shape[0])

    def test_gated_attention_starts_as_pointnet(self, rng):
        network = init_network(small("attention-max"), rng)
        encoder = network.encoder
        cloud = rng.random((2, 20, 3))
        assert encoder.param("omega").data.tolist() == [0.0]
        expected = encoder.post(encoder.stem(cloud))
        assert np.array_equal(encoder.per_point(cloud).data, expected.data)

    def test_omega_receives_gradient(self, rng):
        network = init_network(small("attention-max"), rng)
        with Tape() as tape:
            leaves = network.bind(tape)
            (grad,) = backward(tape, F.sum(network.logits(rng.random((2, 20, 3)))), [leaves["encoder.omega"]])
        network.unbind()
        assert grad.data[0] != 0.0

    def test_gradient_penalty_weight_gradient(self, rng):
        network = init_network(small("pointnet-max"), rng)
        real, fake = rng.normal(size=(3, 12, 3)) * 0.5, rng.normal(size=(3, 12, 3)) * 0.5

        def penalty_value():
            with Tape():
                return gradient_penalty(network.logits, real, fake, np.random.default_rng(9)).item()

        with Tape() as tape:
            with network.bound(tape) as leaves:
                penalty = gradient_penalty(network.logits, real, fake, np.random.default_rng(9))
                grads = dict(zip(leaves, backward(tape, penalty, list(leaves.values()))))
        params = network.parameters()
        h = 1e-6
        for name in ("encoder.mlp.layer0.weight", "head.layer0.weight"):
            value = params[name]
            for index in [(0, 0), (1, 2)]:
                original = value[index]
                value[index] = original + h
                up = penalty_value()
                value[index] = original - h
                down = penalty_value()
                value[index] = original
                numeric = (up - down) / (2 * h)
                assert grads[name].data[index] == pytest.approx(numeric, rel=1e-3, abs=1e-8)

    def test_pool_hand_worked(self):
        rows = np.array([[1.0, 5.0], [3.0, 2.0]])
        assert pool(rows, "max").data.tolist() == [3.0, 5.0]
        assert pool(rows, "avg").data.tolist() == [2.0, 3.5]
        assert pool(rows, "mix").data.tolist() == [3.0, 5.0, 2.0, 3.5]
        assert pool(rows[:1], "mix").data.tolist() == [1.0, 5.0, 1.0, 5.0]
        with pytest.raises(ValueError, match="empty"):
            pool(np.zeros((0, 2)), "max")

    def test_pool_duplication(self, rng):
        rows = rng.normal(size=(7, 4))
        doubled = np.concatenate([rows, rows])
        for mode in ("max", "avg", "mix"):
            assert np.allclose(pool(doubled, mode).data, pool(rows, mode).data, rtol=0, atol=1e-12)
        extra = np.concatenate([rows, rows[:1]])
        assert np.array_equal(pool(extra, "max").data, pool(rows, "max").data)
        assert not np.allclose(pool(extra, "avg").data, pool(rows, "avg").data)

    def test_duplicated_point_hides_from_max_discriminator(self, rng):
        cloud = rng.random((1, 20, 3)) - 0.5
        duplicated = np.concatenate([cloud, cloud[:, :3]], axis=1)
        max_net = init_network(small("pointnet-max"), rng)
        avg_net = init_network(small("pointnet-avg"), rng)
        assert max_net.logits(duplicated).item() == pytest.approx(max_net.logits(cloud).item(), rel=0, abs=1e-12)
        assert abs(avg_net.logits(duplicated).item() - avg_net.logits(cloud).item()) > 1e-9

    def test_attention_matches_dense_oracle(self, rng):
        features, values = rng.normal(size=(1, 4, 6)), rng.normal(size=(1, 4, 6))
        g, h = rng.normal(size=(1, 4, 3)), rng.normal(size=(1, 4, 3))
        scores = g[0] @ h[0].T
        weights = np.exp(scores - scores.max(axis=1, keepdims=True))
        weights /= weights.sum(axis=1, keepdims=True)
        expected = features[0] + 0.7 * (weights @ values[0])
        out = attention_block(features, g, h, values, Tensor(np.array([0.7]))).data
        assert np.allclose(out[0], expected, rtol=0, atol=1e-12)

    def test_attention_encoder_matches_dense_oracle(self, rng):
        network = init_network(small("attention-mix"), rng)
        encoder = network.encoder
        encoder.parameters()["omega"][...] = 0.7
        cloud = rng.random((1, 4, 3)) - 0.5
        stem = encoder.stem(cloud).data
        g, h, values = encoder.g(stem).data[0], encoder.h(stem).data[0], encoder.k(stem).data[0]
        scores = g @ h.T
        weights = np.exp(scores - scores.max(axis=1, keepdims=True))
        weights /= weights.sum(axis=1, keepdims=True)
        expected = encoder.post(stem[0] + 0.7 * (weights @ values)).data
        assert np.allclose(encoder.per_point(cloud).data[0], expected, rtol=0, atol=1e-12)

    def test_single_point_attention(self, rng):
        features, values = rng.normal(size=(1, 1, 5)), rng.normal(size=(1, 1, 5))
        g, h = rng.normal(size=(1, 1, 3)), rng.normal(size=(1, 1, 3))
        out = attention_block(features, g, h, values, Tensor(np.array([0.3]))).data
        assert np.allclose(out, features + 0.3 * values, rtol=0, atol=1e-15)
        assert np.allclose(attention_block(features, g, h, values).data, features + values, rtol=0, atol=1e-15)

    @pytest.mark.parametrize("kind", DISCRIMINATOR_KINDS)
    def test_weight_gradients_match_finite_differences(self, rng, kind):
        network = init_network(small(kind, k=4), rng).eval()
        cloud = rng.random((2, 16, 3)) - 0.5
        with Tape() as tape:
            with network.bound(tape) as leaves:
                total = F.sum(network.logits(cloud))
                grads = dict(zip(leaves, backward(tape, total, list(leaves.values()))))
        params = network.parameters()
        names = list(params)
        h = 1e-6
        for name in (names[0], names[len(names) // 2], names[-1]):
            value = params[name]
            index = np.unravel_index(0, value.shape)
            original = value[index]
            value[index] = original + h
            up = F.sum(network.logits(cloud)).item()
            value[index] = original - h
            down = F.sum(network.logits(cloud)).item()
            value[index] = original
            assert grads[name].data[index] == pytest.approx((up - down) / (2 * h), rel=1e-4, abs=1e-7)

    def test_deform_generator_is_lipschitz_in_the_template(self, rng):
        generator = init_network(NetworkSpec("deform-generator", width=0.05, latent_dim=8, num_points=20), rng)
        generator.eval()
        bound = 0.25
        for i, layer in enumerate(generator.deform.layers()):
            weight = layer.parameters()["weight"]
            bound *= np.linalg.norm(weight[:3] if i == 0 else weight, 2)
        norm = getattr(generator.deform, f"norm{generator.deform.depth - 1}")
        bound *= np.max(np.abs(norm.parameters()["gamma"]) / np.sqrt(norm.buffer("running_var") + norm.eps))
        for layer in generator.out.layers():
            bound *= np.linalg.norm(layer.parameters()["weight"], 2)

        template = sample_sphere(20, rng)
        step = rng.normal(size=(20, 3))
        step *= 9e-4 / np.linalg.norm(step, axis=1, keepdims=True)
        z = rng.standard_normal((1, 8))
        moved = generator(z, template + step).data[0] - generator(z, template).data[0]
        assert np.all(np.linalg.norm(moved, axis=1) <= bound * 9e-4 + 1e-12)

    def test_generators(self, rng):
        fc = init_network(NetworkSpec("fc-generator", width=0.05, latent_dim=8, num_points=30), rng)
        out = fc(rng.standard_normal((4, 8))).data
        assert out.shape == (4, 30, 3) and np.all(np.abs(out) < 0.5)
        deform = init_network(NetworkSpec("deform-generator", width=0.05, latent_dim=8, num_points=30), rng)
        out = deform(rng.standard_normal((2, 8)), rng.standard_normal((2, 30, 3))).data
        assert out.shape == (2, 30, 3) and np.all(np.abs(out) < 0.5)
        with pytest.raises(ValueError, match="latent"):
            fc(np.zeros((2, 7)))

    def test_headless_extractor_keeps_features(self, rng):
        spec = NetworkSpec("feature-extractor", width=0.0625, backbone="pointnet-mix", num_classes=3)
        extractor = init_network(spec, rng).eval()
        cloud = rng.random((2, 24, 3))
        headless = extractor.headless()
        assert headless.spec.num_classes == 0
        assert np.array_equal(headless.features(cloud).data, extractor.features(cloud).data)
        assert extractor(cloud).shape == (2, 3)
        with pytest.raises(ValueError):
            headless(cloud)


class TestDGCNN:
    def test_knn_matches_brute_force(self, rng):
        points = rng.random((30, 3))
        idx = knn(points, 5)
        dist = np.linalg.norm(points[:, None] - points[None], axis=-1)
        assert np.array_equal(idx[:, 0], np.arange(30))
        for i in range(30):
            assert set(idx[i]) == set(np.argsort(dist[i], kind="stable")[:5])

    def test_knn_needs_enough_points(self, rng):
        with pytest.raises(ValueError, match="k < N"):
            knn(rng.random((5, 3)), 5)

    def test_edgeconv_matches_explicit_edges(self, rng):
        conv = EdgeConv(6, 8)
        conv.reset_parameters(rng)
        conv.eval()
        x = rng.random((2, 12, 3))
        idx = knn(x, 4)
        edges = edge_features(F.reshape(x, x.shape), idx).data
        linear = edges @ conv.linear.param("weight").data + conv.linear.param("bias").data
        normalized = linear / np.sqrt(1.0 + conv.norm.eps)
        explicit = np.where(normalized > 0, normalized, 0.2 * normalized).max(axis=-2)
        assert np.allclose(conv(F.reshape(x, x.shape), idx).data, explicit)

    def test_translation_moves_only_center_half(self, rng):
        x = rng.random((1, 10, 3))
        shift = np.array([0.3, -0.2, 0.5])
        idx = knn(x, 4)
        assert np.array_equal(knn(x + shift, 4), idx)
        edges = edge_features(Tensor(x), idx).data
        moved = edge_features(Tensor(x + shift), idx).data
        assert np.allclose(moved[..., :3], edges[..., :3] + shift, rtol=0, atol=1e-12)
        assert np.allclose(moved[..., 3:], edges[..., 3:], rtol=0, atol=1e-12)

    def test_graphs_are_dynamic(self, rng):
        network = init_network(small("dgcnn", k=4), rng)
        _, graphs = network.encoder.per_point(rng.random((1, 20, 3)), return_graphs=True)
        assert len(graphs) == 5
        assert any(not np.array_equal(graphs[0], g) for g in graphs[1:])


class TestWeights:
    def test_round_trip(self, tmp_path, rng):
        spec = small("dgcnn", k=4)
        blob = init_weights(spec, rng)
        path = str(tmp_path / "net.weights")
        save_weights(blob, path)
        assert load_weights(path, spec).equals(blob)
        network = load_network(path)
        assert isinstance(network, Discriminator)
        cloud = rng.random((1, 16, 3))
        original = blob.to_network().eval()
        assert np.array_equal(network.eval().logits(cloud).data, original.logits(cloud).data)

    def test_truncated_file(self, tmp_path, rng):
        path = tmp_path / "net.weights"
        save_weights(init_weights(small("pointnet-max"), rng), str(path))
        path.write_bytes(path.read_bytes()[:-16])
        with pytest.raises(WeightFileError, match="corrupt weight file"):
            load_weights(str(path))

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "net.weights"
        path.write_bytes(b"not a weight file at all")
        with pytest.raises(WeightFileError, match="corrupt weight file"):
            load_weights(str(path))

    def test_fingerprint_mismatch(self, tmp_path, rng):
        path = str(tmp_path / "net.weights")
        save_weights(init_weights(small("pointnet-max"), rng), path)
        with pytest.raises(WeightFileError, match="expected"):
            load_weights(path, small("pointnet-avg"))

    def test_blob_from_network(self, rng):
        spec = small("pointnet-avg")
        network = init_network(spec, rng)
        blob = WeightBlob.from_network(spec, network)
        assert list(blob.tensors) == list(network.state_dict())
