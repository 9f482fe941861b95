import hashlib
import json
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional

POINTNET_KINDS = ("pointnet-max", "pointnet-avg", "pointnet-mix", "pointnet-max-2048")
ATTENTION_KINDS = ("attention-max", "attention-mix", "pugan-attention")
DISCRIMINATOR_KINDS = POINTNET_KINDS + ATTENTION_KINDS + ("dgcnn",)
GENERATOR_KINDS = ("fc-generator", "deform-generator")
EXTRACTOR_BACKBONES = ("pointnet-max", "pointnet-mix", "dgcnn")
KINDS = DISCRIMINATOR_KINDS + GENERATOR_KINDS + ("feature-extractor",)

POOLING = {
    "pointnet-max": "max", "pointnet-avg": "avg", "pointnet-mix": "mix", "pointnet-max-2048": "max",
    "attention-max": "max", "attention-mix": "mix", "pugan-attention": "max", "dgcnn": "mix",
}
ATTENTION_VARIANTS = ("gated", "plain")


@dataclass(frozen=True)
class NetworkSpec:
    """
    Declarative description of a network.

    Attributes:
        kind: One of KINDS.
        width: Multiplier applied to every hidden layer width.
        latent_dim: Generator latent size.
        num_points: Points per generated cloud.
        k: Neighbours per point in DGCNN.
        num_classes: Classifier outputs of a feature extractor; 0 means headless.
        backbone: Encoder kind of a feature extractor.
        attention: "gated" (learnable residual weight) or "plain" attention.
    """
    kind: str
    width: float = 1.0
    latent_dim: int = 512
    num_points: int = 2048
    k: int = 20
    num_classes: int = 0
    backbone: Optional[str] = None
    attention: str = "gated"

    def __post_init__(self):
        object.__setattr__(self, "width", float(self.width))
        for name in ("latent_dim", "num_points", "k", "num_classes"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.kind not in KINDS:
            raise ValueError(f"Unknown network kind: {self.kind}")
        if not self.width > 0:
            raise ValueError(f"Width multiplier must be > 0, got {self.width}")
        if self.latent_dim < 1 or self.num_points < 1 or self.k < 1 or self.num_classes < 0:
            raise ValueError(f"Invalid sizes in {self}")
        if self.kind == "feature-extractor" and self.backbone not in EXTRACTOR_BACKBONES:
            raise ValueError(f"Feature extractor backbone must be one of {EXTRACTOR_BACKBONES}, got {self.backbone}")
        if self.attention not in ATTENTION_VARIANTS:
            raise ValueError(f"Unknown attention variant: {self.attention}")

    @property
    def is_discriminator(self) -> bool:
        return self.kind in DISCRIMINATOR_KINDS

    @property
    def is_generator(self) -> bool:
        return self.kind in GENERATOR_KINDS

    @property
    def encoder_kind(self) -> str:
        return self.backbone if self.kind == "feature-extractor" else self.kind

    @property
    def pooling(self) -> str:
        return POOLING[self.encoder_kind]

    @property
    def feature_dim(self) -> int:
        """
        Size of the pooled global feature.
        """
        dims = layer_dims(self)
        if self.encoder_kind == "dgcnn":
            return 2 * dims["edge4"][-1]
        last = dims["encoder"][-1] if "encoder" in dims else dims["post"][-1]
        return 2 * last if self.pooling == "mix" else last

    def headless(self) -> "NetworkSpec":
        return NetworkSpec(**{**asdict(self), "num_classes": 0})

    def to_dict(self) -> dict:
        return asdict(self)

    def fingerprint(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _scaled(width: float):
    def s(dim: int) -> int:
        return max(1, int(round(dim * width)))
    return s


def _encoder_dims(kind: str, s) -> Dict[str, List[int]]:
    if kind in POINTNET_KINDS:
        top = 2048 if kind == "pointnet-max-2048" else 1024
        return {"encoder": [3, s(64), s(128), s(top)]}
    if kind in ("attention-max", "attention-mix"):
        return {"stem": [3, s(32), s(64)], "g": [s(64), s(32)], "h": [s(64), s(32)], "k": [s(64), s(64)],
                "post": [s(64), s(256), s(1024)]}
    if kind == "pugan-attention":
        fused = 2 * s(64)
        return {"stem": [3, s(32), s(64)], "g": [fused, s(32)], "h": [fused, s(32)], "k": [fused, fused],
                "post": [fused, s(256), s(1024)]}
    if kind == "dgcnn":
        return {"edge0": [6, s(64)], "edge1": [2 * s(64), s(64)], "edge2": [2 * s(64), s(128)],
                "edge3": [2 * s(128), s(256)], "edge4": [2 * s(256), s(1024)]}
    raise ValueError(f"Kind: {kind} has no encoder")


def layer_dims(spec: NetworkSpec) -> Dict[str, List[int]]:
    """
    Widths of every MLP of a network, keyed by block name.
    """
    s = _scaled(spec.width)
    if spec.kind == "fc-generator":
        return {"mlp": [spec.latent_dim, s(512), s(512), s(512), s(2048), spec.num_points * 3]}
    if spec.kind == "deform-generator":
        return {"deform": [3 + spec.latent_dim, s(512), s(512), s(512), s(512)], "out": [s(512), s(64), 3]}

    dims = _encoder_dims(spec.encoder_kind, s)
    if spec.encoder_kind in ATTENTION_KINDS and spec.attention == "plain":
        dims["g"] = [dims["g"][0], dims["k"][1]]
        dims["h"] = [dims["h"][0], dims["k"][1]]
    if spec.encoder_kind == "dgcnn":
        feature = 2 * dims["edge4"][-1]
    else:
        last = dims["encoder"][-1] if "encoder" in dims else dims["post"][-1]
        feature = 2 * last if POOLING[spec.encoder_kind] == "mix" else last

    if spec.kind == "feature-extractor":
        if spec.num_classes:
            dims["classifier"] = [feature, s(512), s(256), spec.num_classes]
    elif spec.kind == "dgcnn":
        dims["head"] = [feature, s(512), s(256), 1]
    else:
        dims["head"] = [feature, s(512), 1]
    return dims
