import pytest

from attonet import bind_channels, build_attonet

VARIANTS = ("A", "B", "C", "D")


@pytest.fixture(scope="session")
def networks():
    return {v: build_attonet(v) for v in VARIANTS}


@pytest.fixture(scope="session")
def bound_networks(networks):
    return {v: bind_channels(net) for v, net in networks.items()}
