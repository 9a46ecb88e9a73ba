import pytest

from nomabeam.channel import RngStream, generate_dataset, sample_rayleigh
from nomabeam.socp import Labeler


@pytest.fixture
def rng_stream():
    return RngStream(seed=7, stream_id=0)


@pytest.fixture
def small_channel(rng_stream):
    """Ordered 4 x 3 Rayleigh channel with noise variance 0.1."""
    return sample_rayleigh(4, 3, 0.1, rng_stream)


@pytest.fixture(scope='session')
def tiny_dataset():
    """24 labeled samples with 2 antennas, 2 users and a 5 dB target."""
    return list(generate_dataset(24, 2, 2, 0.1, 5.0, seed=3, labeler=Labeler()))
