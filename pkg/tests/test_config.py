import math

import pytest

from kslab.config import CERTIFIED_ETA, RunConfig, load_config, with_overrides
from kslab.errors import ConfigurationError


def test_defaults():
    c = RunConfig()
    assert c.frame == "original" and c.scheme == "imex2"
    assert c.mass == 4 * math.pi and c.k == 8 and c.ell == 4
    assert c.eta_value == CERTIFIED_ETA


def test_sectioned_text_is_case_sensitive():
    c = load_config("[time]\nT = 3\ndt = 0.1\n[grid]\nn = 64\n[cert]\nN = 10\nprobes = small_time, blowup\n")
    assert (c.T, c.dt, c.n, c.N) == (3.0, 0.1, 64, 10.0)
    assert c.probes == ("small_time", "blowup")


def test_bare_text_and_overrides():
    c = load_config("eps = 0.02\nframe = self_similar\n", {"n": "128", "eta": None, "b": "none"})
    assert c.eps == 0.02 and c.frame == "self_similar" and c.n == 128 and c.b is None


@pytest.mark.parametrize("text", [
    "frame = polar", "scheme = rk4", "init = box", "mass = -1", "eps = -0.1", "k = 7",
    "ell = 9", "dt = 0", "width = 0", "cadence = 0", "eta = -1", "colour = red", "n = many",
    "frame = self_similar\nalpha = 1",
])
def test_rejections(text):
    with pytest.raises(ConfigurationError):
        load_config(text)


def test_unreadable_text():
    with pytest.raises(ConfigurationError):
        load_config("[run\nT = 1")


def test_digest_tracks_content():
    a = RunConfig()
    assert a.digest() == RunConfig().digest()
    assert a.digest() != with_overrides(a, n=256).digest()
    assert len(a.digest()) == 16


def test_precedence_defaults_text_overrides():
    d = {"n": "400", "eps": "0.1"}
    c = load_config("n = 96\n", {"eps": "0.3"}, d)
    assert (c.n, c.eps) == (96, 0.3)
    assert load_config("", None, d).n == 400
    assert with_overrides(RunConfig(), output_dir="x").digest() == RunConfig().digest()
