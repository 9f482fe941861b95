from .networks import Discriminator, FeatureExtractor, build_network, init_network
from .spec import NetworkSpec, layer_dims
from .weights import WeightBlob, WeightFileError, init_weights, load_network, load_weights, save_weights
