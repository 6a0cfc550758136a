import json

import pytest

from hvar.config import ConfigError, load_config, parse_config


def base(**over):
    doc = {"schema": "hvar/1", "problem": "obstacle",
           "domain": {"shape": "box", "half_widths": 1.0},
           "grid": {"h": 0.5, "R_trunc": 4.0, "collar": 1}}
    doc.update(over)
    return doc


def test_minimal_document():
    cfg = parse_config(base())
    assert cfg.N == 1 and cfg.s == 0.5 and cfg.domain.half_widths == (1.0, 1.0, 1.0)
    assert cfg.r_schedule() == [0.5 ** k for k in range(1, 11)]
    assert cfg.expression("f", "0")([[0.0, 0.0, 0.0]])[0] == 0.0


@pytest.mark.parametrize("mutate,where", [
    (lambda d: d.update(problme="x"), "/"),
    (lambda d: d.update(schema="hvar/2"), "/schema"),
    (lambda d: d["grid"].update(h=-1), "/grid/h"),
    (lambda d: d["kernel"].update(s=1.5) if "kernel" in d else d.update(kernel={"s": 1.5}), "/kernel/s"),
    (lambda d: d["domain"].update(shape="sphere"), "/domain/shape"),
])
def test_schema_errors_name_the_path(mutate, where):
    doc = base()
    mutate(doc)
    with pytest.raises(ConfigError) as exc:
        parse_config(doc)
    assert str(exc.value).startswith(where)


def test_semantic_checks():
    with pytest.raises(ConfigError, match="center"):
        parse_config(base(domain={"shape": "box", "half_widths": 1.0, "center": [0, 0]}))
    with pytest.raises(ConfigError, match="radius"):
        parse_config(base(domain={"shape": "koranyi_ball", "half_widths": 1.0}))
    with pytest.raises(ConfigError, match="not both"):
        parse_config(base(grid={"h": 0.5, "collar": 1, "collar_width": 0.5}))
    with pytest.raises(ConfigError, match="critical exponent"):
        parse_config(base(problem="mountain_pass", solver={"q": 3.0}))
    with pytest.raises(ConfigError, match="/data/f"):
        parse_config(base(data={"f": "1 +"}))
    with pytest.raises(ConfigError, match="k_max"):
        parse_config(base(solver={"r_schedule": {"k_min": 5, "k_max": 2}})).r_schedule()


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")
    p = tmp_path / "bad.json"
    p.write_text("{\n  \"schema\": ,\n}")
    with pytest.raises(ConfigError, match="line 2"):
        load_config(p)
    p.write_text(json.dumps(base()))
    assert load_config(p).problem == "obstacle"
