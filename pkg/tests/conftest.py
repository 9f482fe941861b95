import numpy as np
import pytest

from autodiff.tensor import set_debug
from geometry.procedural import ProceduralSpec, gen_procedural_mesh


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(autouse=True)
def eager_checks():
    set_debug(True)
    yield
    set_debug(True)


@pytest.fixture
def box_mesh():
    return gen_procedural_mesh(ProceduralSpec("box", seed=3))


@pytest.fixture
def chair_mesh():
    return gen_procedural_mesh(ProceduralSpec("chair", seed=5))


@pytest.fixture
def output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("PCGAN_OUTPUT_ROOT", str(tmp_path))
    monkeypatch.setenv("WANDB_MODE", "disabled")
    return tmp_path
