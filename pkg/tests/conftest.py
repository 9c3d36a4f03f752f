import pytest

from feedtrap.stable_poses import TrackConfig, identify_stable_poses
from feedtrap.synthetic_vision import ObservationConfig, generate_dataset
from meshes import cube_mesh, par_marker_mesh

# The marker-block ("cap-like") fixture: a parallelogram slab with a tall
# hidden marker tower. Its long-edge and short-edge wall poses form two
# exactly ambiguous pairs; everything else classifies confidently.
PARBLOCK_SAMPLES = 30_000
PARBLOCK_SEED = 0
PARBLOCK_OBSERVATION = dict(
    resolution=96,
    pixels_per_meter=48.0,
    yaw_jitter_std=0.02,
    translation_jitter_std=0.006,
    pixel_flip_rate=0.002,
    samples_per_pose=60,
    seed=7,
)


@pytest.fixture(scope="session")
def parblock_mesh():
    return par_marker_mesh()


@pytest.fixture(scope="session")
def parblock_poses(parblock_mesh):
    return identify_stable_poses(
        parblock_mesh,
        TrackConfig(),
        n_samples=PARBLOCK_SAMPLES,
        seed=PARBLOCK_SEED,
        part_id="parblock",
    )


@pytest.fixture(scope="session")
def parblock_records(parblock_mesh, parblock_poses):
    cfg = ObservationConfig(**PARBLOCK_OBSERVATION)
    return generate_dataset(parblock_mesh, parblock_poses, cfg)


@pytest.fixture(scope="session")
def cube_poses():
    return identify_stable_poses(
        cube_mesh(), TrackConfig(), n_samples=10_000, seed=0, part_id="cube"
    )
