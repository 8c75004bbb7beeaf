import json
import subprocess
import sys

import pytest

from offline_assort.cli import main

CONFIG = {"scenario": {"family": "mnl", "N": 6, "K": 2, "d": 3}, "p_star": 0.3,
          "sample_sizes": [150], "num_trials": 2, "base_seed": 1}


def run(argv):
    assert main(argv) == 0


def pipeline(tmp_path, tag):
    d = tmp_path / tag
    d.mkdir()
    inst, data = str(d / "inst.json"), str(d / "data.jsonl")
    run(["generate", "--N", "8", "--K", "3", "--d", "3", "--n", "300", "--seed", "5",
         "--instance", inst, "--dataset", data])
    run(["estimate", "--catalog", inst, "--dataset", data, "--out", str(d / "fit.json")])
    run(["solve", "--catalog", inst, "--dataset", data, "--family", "mnl", "--method", "pasta",
         "--out", str(d / "pasta.json")])
    run(["solve", "--catalog", inst, "--dataset", data, "--family", "mnl", "--method", "as-if",
         "--out", str(d / "asif.json")])
    model = d / "model.json"
    model.write_text(json.dumps(json.loads((d / "inst.json").read_text())["model"]))
    run(["solve", "--catalog", inst, "--model", str(model), "--out", str(d / "known.json")])
    run(["minimax-instance", "--d", "4", "--n", "16", "--seed", "2",
         "--instance", str(d / "mm.json"), "--dataset", str(d / "mm.jsonl")])
    cfg = d / "cfg.json"
    cfg.write_text(json.dumps(CONFIG))
    run(["experiment", "--config", str(cfg), "--out-dir", str(d / "exp"), "--workers", "1"])
    return d


def test_repeated_commands_are_byte_identical(tmp_path):
    a, b = pipeline(tmp_path, "a"), pipeline(tmp_path, "b")
    for name in ["inst.json", "data.jsonl", "fit.json", "pasta.json", "asif.json", "known.json",
                 "mm.json", "mm.jsonl", "exp/summary.csv"]:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    strip = lambda p: [line.rsplit(",", 1)[0] for line in p.read_text().splitlines()]
    assert strip(a / "exp/trials.csv") == strip(b / "exp/trials.csv")


def test_outputs_are_well_formed(tmp_path):
    d = pipeline(tmp_path, "c")
    inst = json.loads((d / "inst.json").read_text())
    assert inst["metadata"]["rng"] == "numpy.random.PCG64" and inst["metadata"]["seed"] == 5
    known = json.loads((d / "known.json").read_text())
    assert known["assortment"] == inst["optimal_assortment"]
    pasta = json.loads((d / "pasta.json").read_text())
    assert pasta["worst_case_value"] <= pasta["reference_value"] + 1e-12
    assert len((d / "data.jsonl").read_text().splitlines()) == 300
    fit = json.loads((d / "fit.json").read_text())
    assert fit["fit"]["alpha"] == 2 * fit["fit"]["loss"]


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "offline_assort", "minimax-instance", "--d", "2",
                          "--n", "4"], capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["metadata"]["d"] == 2


def test_bad_arguments_exit_nonzero():
    with pytest.raises(SystemExit) as info:
        main(["solve", "--catalog", "missing.json", "--method", "pasta", "--bogus"])
    assert info.value.code != 0
