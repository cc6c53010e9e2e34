import sys
import os

import numpy as np
import pytest
import torch

sys.path.insert(0, os.path.dirname(__file__))

torch.set_num_threads(1)


@pytest.fixture(autouse=True)
def _seed_torch():
    torch.manual_seed(1234)


@pytest.fixture
def tiny_critic():
    """Small unconstrained critic usable on 4x4 inputs."""

    torch.manual_seed(7)
    return torch.nn.Sequential(
        torch.nn.Conv2d(3, 8, 3, padding=1),
        torch.nn.LeakyReLU(0.2),
        torch.nn.Conv2d(8, 1, 3, padding=1),
    ).double()


def make_dataset(n=8, size=64, seed=0):
    """Synthetic (srgb, raw) tensor pair stack for training tests."""
    from revisp.data import to_tensor
    from revisp.ispsim import make_synthetic_pair

    rng = np.random.default_rng(seed)
    raws, srgbs = [], []
    for _ in range(n):
        raw, srgb, _ = make_synthetic_pair((size, size), rng)
        raws.append(to_tensor(raw))
        srgbs.append(to_tensor(srgb))
    return torch.stack(srgbs), torch.stack(raws)


@pytest.fixture(scope="session")
def overfit_data():
    return make_dataset(n=8, size=64, seed=0)
