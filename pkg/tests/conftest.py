import numpy as np
import pytest

from loadsynth.hmmc import train_baseline, train_hmmc
from loadsynth.profiles import write_csv

import corpus


@pytest.fixture(scope="session")
def behavior_corpus():
    profiles, truth = corpus.two_behavior_corpus()
    return profiles, truth


@pytest.fixture(scope="session")
def behavior_config():
    return corpus.two_behavior_config()


@pytest.fixture(scope="session")
def hmmc_model(behavior_corpus, behavior_config):
    profiles, _ = behavior_corpus
    return train_hmmc(profiles, behavior_config)


@pytest.fixture(scope="session")
def baseline_model(behavior_corpus, behavior_config):
    profiles, _ = behavior_corpus
    return train_baseline(profiles, behavior_config)


@pytest.fixture(scope="session")
def crossing_models():
    profiles = corpus.crossing_corpus()
    cfg = corpus.crossing_config()
    return train_hmmc(profiles, cfg), train_baseline(profiles, cfg)


@pytest.fixture(scope="session")
def seasonal_profile():
    return corpus.seasonal_single_year()


@pytest.fixture(scope="session")
def seasonal_model(seasonal_profile):
    return train_hmmc([seasonal_profile], corpus.seasonal_config())


@pytest.fixture(scope="session")
def mini_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "mini.csv"
    write_csv(path, corpus.mini_corpus())
    return path


@pytest.fixture()
def rng():
    return np.random.Generator(np.random.PCG64(20250809))
