"""Fixtures shared by the adapter tests: a deterministic toy classifier
in both TorchScript and builtin-manifest form."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

torch = pytest.importorskip("torch")

DATA_DIR = Path(__file__).parent / "data"
GOLDEN_PATH = DATA_DIR / "golden_transcript.txt"


def toy_weights():
    """Fixed dense weights; PCG64 keeps them stable across platforms."""
    rng = np.random.Generator(np.random.PCG64(1))
    w1 = rng.normal(0, 0.3, size=(16, 64)).astype(np.float32)
    b1 = rng.normal(0, 0.1, size=16).astype(np.float32)
    w2 = rng.normal(0, 0.3, size=(3, 16)).astype(np.float32)
    b2 = rng.normal(0, 0.1, size=3).astype(np.float32)
    return w1, b1, w2, b2


def build_torch_module():
    w1, b1, w2, b2 = toy_weights()
    net = torch.nn.Sequential(
        torch.nn.Flatten(),
        torch.nn.Linear(64, 16),
        torch.nn.ReLU(),
        torch.nn.Linear(16, 3),
    )
    with torch.no_grad():
        net[1].weight.copy_(torch.from_numpy(w1))
        net[1].bias.copy_(torch.from_numpy(b1))
        net[3].weight.copy_(torch.from_numpy(w2))
        net[3].bias.copy_(torch.from_numpy(b2))
    net.eval()
    return net


@pytest.fixture(scope="session")
def model_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("served") / "toy.pt"
    scripted = torch.jit.trace(build_torch_module(), torch.zeros(1, 1, 8, 8))
    extra = {"meta.json": json.dumps({"input_shape": [1, 8, 8]})}
    torch.jit.save(scripted, str(path), _extra_files=extra)
    return path


@pytest.fixture(scope="session")
def builtin_manifest(tmp_path_factory):
    """The same weights exported to the manifest the primary toolkit reads."""
    from distprobe.classifier import make_net, save_builtin

    w1, b1, w2, b2 = toy_weights()
    net = make_net(
        [
            (w1.astype(np.float64), b1.astype(np.float64), "relu"),
            (w2.astype(np.float64), b2.astype(np.float64), "none"),
        ]
    )
    out = tmp_path_factory.mktemp("exported")
    return save_builtin(net, (1, 8, 8), out)
