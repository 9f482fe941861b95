import numpy as np

from autodiff import functional as F
from autodiff.tensor import Tensor, as_tensor

from .attention import AttentionEncoder
from .dgcnn import DGCNNEncoder
from .generators import DeformGenerator, FCGenerator
from .module import MLP, Module
from .pointnet import PointNetEncoder
from .spec import ATTENTION_KINDS, POINTNET_KINDS, NetworkSpec, layer_dims


def _batched(cloud):
    cloud = as_tensor(cloud)
    if cloud.ndim == 2:
        return F.reshape(cloud, (1,) + tuple(cloud.shape)), True
    if cloud.ndim != 3 or cloud.shape[-1] != 3:
        raise ValueError(f"Expected clouds of shape (B, N, 3), got {cloud.shape}")
    return cloud, False


def build_encoder(spec: NetworkSpec, dims) -> Module:
    kind = spec.encoder_kind
    if kind in POINTNET_KINDS:
        return PointNetEncoder(dims["encoder"], spec.pooling)
    if kind in ATTENTION_KINDS:
        return AttentionEncoder(dims, spec.pooling, spec.attention, fuse_early=kind == "pugan-attention")
    if kind == "dgcnn":
        return DGCNNEncoder(dims, spec.k)
    raise ValueError(f"Kind: {kind} has no encoder")


class Discriminator(Module):
    """
    Encoder -> global feature -> head MLP -> sigmoid score in (0, 1).
    """

    def __init__(self, spec: NetworkSpec):
        super().__init__()
        if not spec.is_discriminator:
            raise ValueError(f"Kind: {spec.kind} is not a discriminator")
        self.spec = spec
        dims = layer_dims(spec)
        self.encoder = build_encoder(spec, dims)
        self.head = MLP(dims["head"], activate_last=False)

    def features(self, cloud) -> Tensor:
        cloud, single = _batched(cloud)
        feature = self.encoder(cloud)
        return F.reshape(feature, feature.shape[1:]) if single else feature

    def per_point(self, cloud) -> Tensor:
        cloud, _ = _batched(cloud)
        return self.encoder.per_point(cloud)

    def logits(self, cloud) -> Tensor:
        cloud, single = _batched(cloud)
        out = F.reshape(self.head(self.encoder(cloud)), (cloud.shape[0],))
        return F.reshape(out, ()) if single else out

    def forward(self, cloud) -> Tensor:
        return F.sigmoid(self.logits(cloud))


class FeatureExtractor(Module):
    """
    Encoder with an optional shape-classification head.

    The pooled global feature (before any head) is what Frechet distances use.
    """

    def __init__(self, spec: NetworkSpec):
        super().__init__()
        if spec.kind != "feature-extractor":
            raise ValueError(f"Kind: {spec.kind} is not a feature extractor")
        self.spec = spec
        dims = layer_dims(spec)
        self.encoder = build_encoder(spec, dims)
        if spec.num_classes:
            self.classifier = MLP(dims["classifier"], activate_last=False)

    def features(self, cloud) -> Tensor:
        cloud, single = _batched(cloud)
        feature = self.encoder(cloud)
        return F.reshape(feature, feature.shape[1:]) if single else feature

    def forward(self, cloud) -> Tensor:
        if not self.spec.num_classes:
            raise ValueError("Headless feature extractor has no classifier")
        cloud, _ = _batched(cloud)
        return self.classifier(self.encoder(cloud))

    def headless(self) -> "FeatureExtractor":
        """
        Copy without the classifier, carrying the encoder weights and statistics.
        """
        extractor = FeatureExtractor(self.spec.headless())
        extractor.load_state_dict({k: v for k, v in self.state_dict().items() if k.startswith("encoder.")})
        return extractor.eval()


def build_network(spec: NetworkSpec) -> Module:
    """
    Instantiate the (uninitialized) network described by a spec.
    """
    dims = layer_dims(spec)
    if spec.kind == "fc-generator":
        return FCGenerator(dims["mlp"], spec.num_points)
    if spec.kind == "deform-generator":
        return DeformGenerator(dims["deform"], dims["out"], spec.num_points)
    if spec.kind == "feature-extractor":
        return FeatureExtractor(spec)
    return Discriminator(spec)


def init_network(spec: NetworkSpec, rng: np.random.Generator) -> Module:
    """
    Build a network and draw fan-in scaled uniform weights, U(-sqrt(3/fan_in), sqrt(3/fan_in)),
    with batch-norm scale 1, shift 0 and attention omega 0.
    """
    network = build_network(spec)
    network.reset_parameters(rng)
    return network
