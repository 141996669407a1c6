import numpy as np
import pytest

from secure_aris.channel import RawChannels, build_channels, cascade
from secure_aris.scenario import Placement, desk_scenario

PLACEMENT = Placement((161.0, 89.0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def desk():
    return desk_scenario(seed=7)


@pytest.fixture
def tiny():
    """Two elements per surface, one jammer antenna, one eavesdropper"""
    return desk_scenario(seed=7).replace(n_aris=2, n_fixed=2, n_jam_antennas=1,
                                         eve_positions=((300.0, 300.0),))


@pytest.fixture
def small():
    """Two elements per surface, two jammer antennas, two eavesdroppers"""
    return desk_scenario(seed=11).replace(n_aris=2, n_fixed=2, n_jam_antennas=2)


@pytest.fixture
def tiny_channels(tiny):
    return build_channels(tiny, PLACEMENT, seed=3)


@pytest.fixture
def small_channels(small):
    return build_channels(small, PLACEMENT, seed=5)


def random_complex(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_raw(rng, n_a=3, n_r=4, m=2, k=2) -> RawChannels:
    return RawChannels(
        h_SA=random_complex(rng, n_a), h_AD=random_complex(rng, n_a),
        h_SR=random_complex(rng, n_r), h_RD=random_complex(rng, n_r),
        h_Ak=random_complex(rng, k, n_a), h_Rk=random_complex(rng, k, n_r),
        H_JR=random_complex(rng, n_r, m), h_JD=random_complex(rng, m),
        h_Jk=random_complex(rng, k, m), p_src=1.0, p_jam_max=1.0, noise_power=1.0)


def random_channels(rng, **dims):
    return cascade(random_raw(rng, **dims))
