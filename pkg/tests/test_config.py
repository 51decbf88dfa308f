import json

import pytest

from fermirg.config import DEFAULTS, ConfigError, default_config, load_config, resolve
from fermirg.suites import SUITES


def test_empty_object_gives_defaults():
    cfg = resolve({}, SUITES)
    assert cfg.suites == list(SUITES)
    assert cfg.seed == 0
    assert cfg.lattice.L0 == DEFAULTS["lattice"]["L0"]
    assert cfg.r0 == 2 and cfg.r == 2
    assert cfg.scale_family().M == DEFAULTS["scale"]["M"]


def test_partial_sections_merge():
    cfg = resolve({"lattice": {"L0": 8}, "scale": {"dispersion": {"mu_F": 0.25}}}, SUITES)
    assert cfg.lattice.L0 == 8 and cfg.lattice.Lsp == DEFAULTS["lattice"]["Lsp"]
    assert cfg.scale["dispersion"]["mu_F"] == 0.25
    assert cfg.scale["dispersion"]["mass"] == DEFAULTS["scale"]["dispersion"]["mass"]


@pytest.mark.parametrize("bad,needle", [
    ({"suites": ["no-such-suite"]}, "unknown suite id"),
    ({"scale": {"M": 1.0}}, "scale.M"),
    ({"power_counting": {"M": 0.5}}, "power_counting.M"),
    ({"lattice": {"L0": 3}}, "lattice"),
    ({"seed": -1}, "seed"),
    ({"seed": True}, "seed"),
    ({"samples": {"rg": 0}}, "samples.rg"),
    ({"norm": {"r0": 1.5}}, "norm.r0"),
    ({"interaction": {"kind": "yukawa"}}, "interaction.kind"),
    ({"bogus": 1}, "unknown field"),
    ({"lattice": 4}, "expected an object"),
])
def test_invalid_configs(bad, needle):
    with pytest.raises(ConfigError, match=needle):
        resolve(bad, SUITES)


def test_non_object_rejected():
    with pytest.raises(ConfigError):
        resolve([1, 2], SUITES)


def test_load_config(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"suites": ["partition-of-unity", "appendix-C"], "seed": 7}))
    cfg = load_config(p)
    assert cfg.suites == ["partition-of-unity", "appendix-C"] and cfg.seed == 7
    (tmp_path / "broken.json").write_text("{\"seed\": ")
    with pytest.raises(ConfigError, match="parse error at line 1"):
        load_config(tmp_path / "broken.json")
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")


def test_digest_ignores_key_order():
    a = resolve({"seed": 3, "lattice": {"L0": 8, "Lsp": 4}}, SUITES)
    b = resolve({"lattice": {"Lsp": 4, "L0": 8}, "seed": 3}, SUITES)
    assert a.digest() == b.digest()
    assert a.digest() != default_config(seed=4).digest()
