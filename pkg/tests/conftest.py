import numpy as np
import pytest

from kteach.fixtures import fixture_path, fixture_text
from kteach.urdf import extract_chain, parse_urdf

CHAIN_SPECS = {
    "planar2": ("planar2.urdf", "base_link", "tool_link"),
    "arm6": ("arm6.urdf", "base_link", "flange_link"),
    "arm7": ("arm7.urdf", "base_link", "wrist_link"),
}


def load_fixture_chain(name):
    urdf, base, tip = CHAIN_SPECS[name]
    return extract_chain(parse_urdf(fixture_text(urdf)), base, tip)


@pytest.fixture(scope="session")
def planar2():
    return load_fixture_chain("planar2")


@pytest.fixture(scope="session")
def arm6():
    return load_fixture_chain("arm6")


@pytest.fixture(scope="session")
def arm7():
    return load_fixture_chain("arm7")


@pytest.fixture(scope="session")
def all_chains(planar2, arm6, arm7):
    return {"planar2": planar2, "arm6": arm6, "arm7": arm7}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_q(chain, rng):
    lower = np.where(np.isfinite(chain.lower_limits), chain.lower_limits, -np.pi)
    upper = np.where(np.isfinite(chain.upper_limits), chain.upper_limits, np.pi)
    return rng.uniform(lower, upper)


@pytest.fixture(scope="session")
def scene_config_path():
    return fixture_path("scene_cubes.json")


@pytest.fixture(scope="session")
def teach_config_path():
    return fixture_path("teach_config.json")


@pytest.fixture(scope="session")
def stacking_script_path():
    return fixture_path("stacking_script.jsonl")
