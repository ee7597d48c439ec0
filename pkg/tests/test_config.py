import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swingup.config import ConfigError, ExperimentConfig, parse_axis, parse_slits


def test_defaults_round_trip():
    cfg = ExperimentConfig()
    again = ExperimentConfig.from_ini(cfg.to_ini())
    assert again == cfg
    assert again.digest() == cfg.digest()
    assert cfg.to_ini() == ExperimentConfig().to_ini()


def test_axis_parsing():
    assert parse_axis("150:400:5")[-1] == 400.0
    assert len(parse_axis("150:400:5")) == 51
    assert parse_axis("1, 2.5,4") == (1.0, 2.5, 4.0)
    assert parse_axis("") == ()
    with pytest.raises(ValueError):
        parse_axis("1:2")
    with pytest.raises(ValueError):
        parse_axis("5:1:1")


def test_slit_parsing():
    s = parse_slits("-116.6 42.3; 250 42.3 0.5 1.2 gaussian")
    assert s == ((-116.6, 42.3, 1.0, 0.0, "hard"), (250.0, 42.3, 0.5, 1.2, "gaussian"))
    with pytest.raises(ValueError):
        parse_slits("1")


def test_errors_carry_line_numbers():
    text = "[run]\nseed = 3\n\n[super]\ndetunings = 300, 200\n"
    with pytest.raises(ConfigError, match=r"x\.ini:5: \[super\] detunings"):
        ExperimentConfig.from_ini(text, source="x.ini")
    with pytest.raises(ConfigError, match=r":2: \[emitter\] unknown key 'tone'"):
        ExperimentConfig.from_ini("[emitter]\ntone = 3\n", source="a")
    with pytest.raises(ConfigError, match="unknown section"):
        ExperimentConfig.from_ini("[nope]\n")
    with pytest.raises(ConfigError, match=r":2: \[emitter\] t1"):
        ExperimentConfig.from_ini("[emitter]\nt1 = fast\n", source="a")


@pytest.mark.parametrize("section, values, key", [
    ("emitter", {"t2_star": 40.0}, "t2_star"),
    ("emitter", {"kind": "three_level"}, "kind"),
    ("super", {"sign": 2.0}, "sign"),
    ("super", {"detunings": ()}, "detunings"),
    ("super", {"multipliers": (0.5, 1.0)}, "multipliers"),
    ("sweep", {"noisy": True}, "seed"),
    ("sweep", {"fidelity_envelope": 0.0}, "fidelity_envelope"),
    ("run", {"workers": 0}, "workers"),
    ("run", {"rel_tol": 0.1}, "rel_tol"),
])
def test_validation(section, values, key):
    with pytest.raises(ConfigError, match=key):
        ExperimentConfig().with_overrides(**{section: values})


def test_overrides_change_digest():
    a = ExperimentConfig()
    b = a.with_overrides(run={"seed": 4})
    assert b.run.seed == 4 and a.run.seed is None
    assert a.digest() != b.digest()
    with pytest.raises(ConfigError):
        a.with_overrides(bogus={})


@given(seed=st.one_of(st.none(), st.integers(0, 2**31)),
       t1=st.floats(0.1, 100),
       det=st.lists(st.floats(0, 1e3, allow_nan=False), min_size=1, max_size=6, unique=True),
       width=st.floats(1, 500))
def test_ini_round_trip_property(seed, t1, det, width):
    cfg = ExperimentConfig().with_overrides(
        run={"seed": seed}, emitter={"t1": t1},
        super={"detunings": tuple(sorted(det)), "fixed_width": width})
    again = ExperimentConfig.from_ini(cfg.to_ini())
    assert again == cfg
    assert np.array_equal(again.super.detunings, cfg.super.detunings)


def test_load(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[run]\nseed = 9\n")
    assert ExperimentConfig.load(p).run.seed == 9
