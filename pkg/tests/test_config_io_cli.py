import json
import math
from pathlib import Path

import numpy as np
import pytest

from causalsel.cli import main
from causalsel.config import parse_config, serialize_config
from causalsel.errors import ConfigError, DataError
from causalsel.io import format_float, ingest_csv, write_trajectory_csv
from causalsel.models import ModelFamily
from causalsel.selection import AIC, BIC, select
from causalsel.simulate import InnovationLaw, Trajectory

SIM_CFG = """\
[run]
seed = 7

[model]
family = AR
orders = 1
theta = 0.5, 1.0

[simulate]
n = 300
"""

SEL_CFG = """\
[collection]
family = AR
orders = 2

[selection]
penalty = AIC, BIC, loglog(1.0, 0.5)
"""

MC_CFG = """\
[run]
seed = 3

[model]
family = AR
orders = 1
theta = 0.5, 1.0

[collection]
family = AR
orders = 2

[selection]
penalty = AIC, BIC

[mc]
n_grid = 100, 200, 400
replications = 3
"""


def test_minimal_simulate_defaults():
    cfg = parse_config(SIM_CFG, "simulate")
    assert cfg.simulate.burn_in == 1000
    assert cfg.simulate.law == InnovationLaw("gaussian")
    assert cfg.simulate.n == 300
    assert cfg.theta.values.tolist() == [0.5, 1.0]
    assert cfg.penalties == (BIC(),)


def test_unknown_key_is_named():
    with pytest.raises(ConfigError) as info:
        parse_config("[selection]\npenlaty = BIC\n")
    assert "penlaty" in str(info.value)
    assert info.value.line == 2


def test_unknown_section_and_syntax():
    with pytest.raises(ConfigError):
        parse_config("[nonsense]\n")
    with pytest.raises(ConfigError) as info:
        parse_config("[run]\nseed 3\n")
    assert info.value.line == 2


def test_penalty_order_preserved():
    cfg = parse_config(MC_CFG, "mc")
    assert cfg.penalties == (AIC(), BIC())
    assert cfg.mc.n_grid == (100, 200, 400)


def test_round_trip():
    for text in (SIM_CFG, SEL_CFG, MC_CFG):
        cfg = parse_config(text)
        again = parse_config(serialize_config(cfg))
        assert again == cfg
        assert serialize_config(again) == serialize_config(cfg)


def test_assumption_d_violation_reported():
    text = "[model]\nfamily = GARCH\norders = 1, 1\nlower = 0.0, 0.0, 0.0\nupper = 1.0, 1.0, 0.99\n"
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert "Assumption D" in str(info.value)
    assert info.value.line == 4


def test_bad_values_carry_lines():
    with pytest.raises(ConfigError) as info:
        parse_config("[mc]\nn_grid = 400, 200\n")
    assert info.value.line == 2
    with pytest.raises(ConfigError) as info:
        parse_config("[selection]\npenalty = BIC, zzz\n")
    assert info.value.line == 2
    with pytest.raises(ConfigError):
        parse_config("[model]\nfamily = AR\norders = 1\ntheta = 0.5, 1.0, 2.0\n")


def test_active_only_theta():
    cfg = parse_config("[model]\nfamily = AR\norders = 2\nactive = 0, 2\ntheta = 0.3, 1.5\n")
    assert cfg.theta.values.tolist() == [0.3, 0.0, 1.5]


def test_csv_examples(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("value\n1.0\n2.0")
    assert ingest_csv(p).values.tolist() == [1.0, 2.0]
    p.write_text("1.0\nNaN")
    with pytest.raises(DataError) as info:
        ingest_csv(p)
    assert info.value.row == 2
    p.write_text("")
    with pytest.raises(DataError):
        ingest_csv(p)
    p.write_text("1.0\nabc\n")
    with pytest.raises(DataError) as info:
        ingest_csv(p)
    assert info.value.row == 2


def test_csv_round_trip_is_bit_exact(tmp_path):
    vals = np.random.default_rng(0).standard_normal(1000) * 10.0 ** np.random.default_rng(1).integers(-30, 30, 1000)
    p = tmp_path / "t.csv"
    write_trajectory_csv(Trajectory(vals), p)
    assert ingest_csv(p).values.tobytes() == vals.tobytes()
    assert float(format_float(0.1)) == 0.1


def run(args):
    return main([str(a) for a in args])


def outputs(directory: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.name != "run_metadata.json"}


@pytest.fixture
def cfgs(tmp_path):
    paths = {}
    for name, text in (("sim", SIM_CFG), ("sel", SEL_CFG), ("mc", MC_CFG)):
        paths[name] = tmp_path / f"{name}.cfg"
        paths[name].write_text(text)
    return paths


def test_subcommands_are_deterministic(tmp_path, cfgs):
    for k in (1, 2):
        assert run(["simulate", "--config", cfgs["sim"], "--out", tmp_path / f"sim{k}"]) == 0
    data = tmp_path / "sim1" / "trajectory.csv"
    for k in (1, 2):
        assert run(["fit", "--config", cfgs["sim"], "--data", data, "--out", tmp_path / f"fit{k}"]) == 0
        assert run(["select", "--config", cfgs["sel"], "--data", data, "--out", tmp_path / f"sel{k}"]) == 0
        assert run(["mc", "--config", cfgs["mc"], "--out", tmp_path / f"mc{k}"]) == 0
    for stem in ("sim", "fit", "sel", "mc"):
        a, b = outputs(tmp_path / f"{stem}1"), outputs(tmp_path / f"{stem}2")
        assert a and a == b
    assert (tmp_path / "mc1" / "run_metadata.json").exists()
    doc = json.loads((tmp_path / "mc1" / "experiment.json").read_text())
    assert "diagnostics" in doc


def test_cli_select_matches_in_process(tmp_path, cfgs):
    run(["simulate", "--config", cfgs["sim"], "--out", tmp_path])
    data = tmp_path / "trajectory.csv"
    assert run(["select", "--config", cfgs["sel"], "--data", data, "--out", tmp_path]) == 0
    doc = json.loads((tmp_path / "selection.json").read_text())
    cfg = parse_config(SEL_CFG)
    x = ingest_csv(data)
    for rep_doc, pen in zip(doc["reports"], cfg.penalties):
        rep = select(cfg.collection.build(), x, pen)
        assert rep_doc["chosen"] == rep.chosen
        assert [m["l_hat"] for m in rep_doc["models"]] == [e.fit.l_hat for e in rep.entries]
        assert [m["criterion"] for m in rep_doc["models"]] == [e.criterion for e in rep.entries]


def test_exit_codes(tmp_path, cfgs, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[selection]\npenlaty = BIC\n")
    assert run(["select", "--config", bad, "--data", tmp_path / "x.csv", "--out", tmp_path]) == 2
    assert "penlaty" in capsys.readouterr().err
    assert run(["simulate", "--config", tmp_path / "missing.cfg", "--out", tmp_path]) == 2
    nan = tmp_path / "nan.csv"
    nan.write_text("1.0\nNaN\n")
    assert run(["select", "--config", cfgs["sel"], "--data", nan, "--out", tmp_path]) == 3
    huge = tmp_path / "huge.csv"
    huge.write_text("\n".join(["1e200"] * 50) + "\n")
    garch = tmp_path / "garch.cfg"
    garch.write_text("[model]\nfamily = GARCH\norders = 1, 1\n")
    assert run(["fit", "--config", garch, "--data", huge, "--out", tmp_path]) == 4
    # simulate without [simulate] is a configuration error
    assert run(["simulate", "--config", cfgs["sel"], "--out", tmp_path]) == 2


def test_collection_section_builds_family():
    cfg = parse_config("[collection]\nfamily = garch\norders = 1, 1\nmode = exhaustive\n")
    specs = cfg.collection.build()
    assert specs[0].family == ModelFamily.GARCH(1, 1)
    assert all(math.isfinite(u) for s in specs for u in s.upper)
