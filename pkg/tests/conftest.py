"""Shared fixtures: reference calibration, synthetic scenes, repo paths."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from groundcam.reference import reference_intrinsics, reference_pose
from groundcam.scene import SceneConfig, generate_scene

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES_DIR = REPO_ROOT / "fixtures"


@pytest.fixture
def ref_k():
    return reference_intrinsics()


@pytest.fixture
def ref_pose():
    return reference_pose()


@pytest.fixture
def rng():
    """Fresh deterministic generator per test."""
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def default_scene(tmp_path_factory):
    """One zero-noise scene under the reference calibration, generated once.

    Session-scoped because several modules consume the same files; the scene
    is deterministic, so sharing cannot leak state between tests.
    """
    out = tmp_path_factory.mktemp("scene")
    return generate_scene(SceneConfig(), seed=7, out_dir=out)
