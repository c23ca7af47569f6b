import pytest

from lexmdl.config import ConfigError, Settings, load_settings, parse_config


def test_defaults():
    s = Settings()
    assert (s.iters, s.em_iters, s.prune_budget, s.max_extra) == (15, 3, 1e-4, 2)
    assert s.threads >= 1
    assert not s.use_channel
    assert Settings(mode="phoneme").use_channel


def test_file_then_flags(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\niters = 4\nc_I=0.1  # inline\nmu.voicing=0.2\naudit=yes\n")
    s = load_settings(path)
    assert (s.iters, s.c_I, s.mu, s.audit) == (4, 0.1, {"voicing": 0.2}, True)
    s = load_settings(path, {"iters": 9})
    assert s.iters == 9
    assert s.channel_params().c_I == 0.1


@pytest.mark.parametrize("text", ["iters", "bogus=1", "iters=x", "mu.nope=1", "audit=maybe"])
def test_bad_config_lines(text):
    with pytest.raises(ConfigError):
        Settings().update(parse_config(text))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_settings(tmp_path / "absent.cfg")


def test_invalid_channel_values_are_caught():
    with pytest.raises(ValueError):
        Settings(c_I=1.0).channel_params()


def test_move_config_carries_settings():
    cfg = Settings(iters=3, em_mode="viterbi", threads=2).move_config()
    assert (cfg.max_outer, cfg.em_mode, cfg.threads) == (3, "viterbi", 2)
