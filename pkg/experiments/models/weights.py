import json
import os
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .module import Module
from .networks import build_network, init_network
from .spec import NetworkSpec

MAGIC = b"PCGANWB\x00"
FORMAT_VERSION = 1


class WeightFileError(ValueError):
    pass


@dataclass
class WeightBlob:
    """
    Named parameter and buffer arrays of one network plus its spec.
    """
    spec: NetworkSpec
    tensors: Dict[str, np.ndarray] = field(default_factory=OrderedDict)
    version: int = FORMAT_VERSION

    @property
    def fingerprint(self) -> str:
        return self.spec.fingerprint()

    @classmethod
    def from_network(cls, spec: NetworkSpec, network: Module) -> "WeightBlob":
        return cls(spec, OrderedDict((k, np.array(v)) for k, v in network.state_dict().items()))

    def to_network(self) -> Module:
        network = build_network(self.spec)
        network.load_state_dict(self.tensors)
        return network

    def equals(self, other: "WeightBlob") -> bool:
        return (self.spec == other.spec and list(self.tensors) == list(other.tensors)
                and all(np.array_equal(self.tensors[k], other.tensors[k]) for k in self.tensors))


def init_weights(spec: NetworkSpec, rng: np.random.Generator) -> WeightBlob:
    return WeightBlob.from_network(spec, init_network(spec, rng))


def save_weights(blob: WeightBlob, path: str) -> None:
    """
    Write magic, version, JSON header length, JSON header, then the arrays as
    little-endian doubles in header order.
    """
    header = {
        "spec": blob.spec.to_dict(),
        "fingerprint": blob.fingerprint,
        "tensors": [{"name": name, "shape": list(value.shape)} for name, value in blob.tensors.items()],
    }
    encoded = json.dumps(header, sort_keys=True).encode("utf-8")
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", blob.version, len(encoded)))
        f.write(encoded)
        for value in blob.tensors.values():
            f.write(np.ascontiguousarray(value, dtype="<f8").tobytes())


def load_weights(path: str, expected: Optional[NetworkSpec] = None) -> WeightBlob:
    """
    Read a weight file.

    Raises:
        WeightFileError: On a bad magic, unknown version, truncated payload
            ("corrupt weight file") or a fingerprint that does not match `expected`.
    """
    with open(path, "rb") as f:
        payload = f.read()
    if len(payload) < len(MAGIC) + 8 or payload[:len(MAGIC)] != MAGIC:
        raise WeightFileError(f"corrupt weight file: {path} (bad magic)")
    version, header_len = struct.unpack("<II", payload[len(MAGIC):len(MAGIC) + 8])
    if version != FORMAT_VERSION:
        raise WeightFileError(f"Unsupported weight file version {version} in {path}")
    offset = len(MAGIC) + 8
    try:
        header = json.loads(payload[offset:offset + header_len].decode("utf-8"))
        spec = NetworkSpec(**header["spec"])
    except (ValueError, KeyError, TypeError) as e:
        raise WeightFileError(f"corrupt weight file: {path} ({e})") from None
    if spec.fingerprint() != header["fingerprint"]:
        raise WeightFileError(f"corrupt weight file: {path} (header fingerprint does not match its spec)")
    if expected is not None and expected.fingerprint() != spec.fingerprint():
        raise WeightFileError(
            f"Weight file {path} was written for spec {header['fingerprint'][:12]}, "
            f"expected {expected.fingerprint()[:12]} ({expected.kind})")

    offset += header_len
    tensors = OrderedDict()
    for entry in header["tensors"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        end = offset + 8 * count
        if end > len(payload):
            raise WeightFileError(f"corrupt weight file: {path} (truncated at {entry['name']})")
        tensors[entry["name"]] = np.frombuffer(payload[offset:end], dtype="<f8").astype(np.float64).reshape(
            entry["shape"])
        offset = end
    if offset != len(payload):
        raise WeightFileError(f"corrupt weight file: {path} ({len(payload) - offset} trailing bytes)")
    return WeightBlob(spec, tensors, version)


def load_network(path: str, expected: Optional[NetworkSpec] = None) -> Module:
    return load_weights(path, expected).to_network()
