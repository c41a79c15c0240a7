"""Shared fixtures: intrinsics, rendered bundles, and small helpers."""

import numpy as np
import pytest

import egorect as eg


@pytest.fixture(scope="session")
def k_std():
    return eg.standard_intrinsics()


@pytest.fixture(scope="session")
def upright_bundle(k_std):
    return eg.render_view(eg.standard_scene(), k_std, eg.CameraPose(np.eye(3)))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def random_units(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)
