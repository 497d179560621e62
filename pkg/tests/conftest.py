import numpy as np
import pytest

from hsimdae.cube import SceneSpec, default_endmembers, synth_scene

# Standard Salinas ground-truth class sizes (16 classes, 54,129 labeled
# pixels); used to derive split/augmentation counts without the dataset.
SALINAS_HISTOGRAM = (
    2009, 3726, 1976, 1394, 2678, 3959, 3579, 11271,
    6203, 3278, 1068, 1927, 916, 1070, 7268, 1807,
)


def three_class_spec(rows=60, cols=60, bands=24, noise_sigma=0.0,
                     mix_width=2.0, seed=7):
    """Three vertical-stripe regions with well-separated random endmembers."""
    third = cols // 3
    regions = [
        (1, 0, rows, 0, third),
        (2, 0, rows, third, 2 * third),
        (3, 0, rows, 2 * third, cols),
    ]
    return SceneSpec(
        rows=rows, cols=cols, bands=bands, n_classes=3, regions=regions,
        endmembers=default_endmembers(3, bands, seed),
        noise_sigma=noise_sigma, mix_width=mix_width,
    )


@pytest.fixture(scope="session")
def noiseless_scene():
    spec = three_class_spec()
    cube, labels = synth_scene(spec, seed=3)
    return spec, cube, labels


@pytest.fixture(scope="session")
def noisy_scene():
    spec = three_class_spec(noise_sigma=0.02)
    cube, labels = synth_scene(spec, seed=3)
    return spec, cube, labels


def identity_model(n_bands, class_id=0):
    """Autoencoder whose affine map is the identity (zero bias)."""
    from hsimdae.mdae import MdaeModel, MdaeParams

    return MdaeModel(
        weights=np.eye(n_bands + 1),
        class_id=class_id,
        params=MdaeParams(seed=0),
        training_loss=0.0,
    )
