import pytest

from uavbench import fixtures as synth


@pytest.fixture(scope="session")
def identity_dataset(tmp_path_factory):
    """3-frame sequence whose frames are identical to frame 0."""
    root = tmp_path_factory.mktemp("identity_ds")
    fx = synth.make_identity_sequence(root, n_frames=3, seed=11)
    return root, fx


@pytest.fixture(scope="session")
def drift_dataset(tmp_path_factory):
    """100-frame drift fixture: scripted tracker goes wrong at frame 50."""
    root = tmp_path_factory.mktemp("drift_ds")
    fx = synth.make_drift_fixture(root, n_frames=100, switch_frame=50, seed=7)
    return root, fx


@pytest.fixture(scope="session")
def detection_dataset(tmp_path_factory):
    """Small detection split with planted template copies."""
    root = tmp_path_factory.mktemp("det_ds")
    fx = synth.make_detection_fixture(root, n_images=10, seed=3)
    return root, fx
