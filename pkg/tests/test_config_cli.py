import json
import math

import pytest

from torsionlab import cli
from torsionlab.config import ConfigError, RunConfig, parse_form
from torsionlab.reduce import resolve_threads

BASE = {
    "geometries": {"S1": {"type": "flat", "gram": [[1.0]]},
                   "T2": {"type": "flat", "gram": [[1.0, 0.2], [0.2, 1.3]]},
                   "T3": {"type": "flat", "gram": [[1, 0.1, 0], [0.1, 1.2, 0.05], [0, 0.05, 0.9]]},
                   "E": {"type": "complex", "tau": [0, 1]}},
    "complexes": {"circ": {"geometry": "S1", "kind": "de-rham", "char": [0.25]},
                  "t2": {"geometry": "T2", "kind": "de-rham", "char": [0.3, 0.15]},
                  "t3": {"geometry": "T3", "kind": "de-rham", "char": [0.3, 0.15, 0.4],
                         "flux": {"0,1,2": 1.0}},
                  "ell": {"geometry": "E", "kind": "dolbeault", "char": [0.5, 0.0]}},
    "jobs": [{"command": "compute", "spec": "circ", "output": "circ.json"}],
}


def write(tmp_path, doc):
    p = tmp_path / "run.json"
    p.write_text(json.dumps(doc))
    return str(p)


def test_config_round_trip():
    cfg = RunConfig.from_dict(BASE)
    again = RunConfig.loads(cfg.dumps())
    assert again.to_dict() == cfg.to_dict()
    assert RunConfig.loads(again.dumps()).dumps() == cfg.dumps()


def test_form_list_and_dict_layouts_agree():
    a = parse_form(3, {"0,1,2": 1.5})
    b = parse_form(3, [{"indices": [0, 1, 2], "coefficient": 1.5}])
    assert a.components.keys() == b.components.keys()


def test_config_validation():
    bad = json.loads(json.dumps(BASE))
    bad["complexes"]["circ"]["geometry"] = "nowhere"
    with pytest.raises(ConfigError):
        RunConfig.from_dict(bad)
    bad = json.loads(json.dumps(BASE))
    bad["jobs"][0]["tolerance"] = -1
    with pytest.raises(ConfigError):
        RunConfig.from_dict(bad)
    with pytest.raises(ConfigError):
        RunConfig.loads("{not json")


def test_compute_circle(tmp_path, capsys):
    out = tmp_path / "out"
    rc = cli.main(["compute", "--config", write(tmp_path, BASE), "--out", str(out)])
    assert rc == 0
    doc = json.loads((out / "circ.json").read_text())
    assert float(doc["torsion"]["log_tau"]) == pytest.approx(0.5 * math.log(2), abs=1e-10)


def test_non_spd_gram_exit_1(tmp_path, capsys):
    doc = json.loads(json.dumps(BASE))
    doc["geometries"]["S1"]["gram"] = [[-1.0]]
    rc = cli.main(["compute", "--config", write(tmp_path, doc), "--out", str(tmp_path)])
    assert rc == 1
    assert "S1" in capsys.readouterr().err


def test_consistency_failure_exit_2(tmp_path, monkeypatch, capsys):
    from torsionlab import zeta as Z
    real = Z._exact_result

    def shifted(fam, grade):
        r = real(fam, grade)
        return Z.ZetaResult(r.grade, r.zeta0, r.zeta_prime0 - 0.01, r.log_det_prime + 0.01, 0.0, r.err)

    monkeypatch.setattr(Z, "_exact_result", shifted)
    doc = json.loads(json.dumps(BASE))
    doc["jobs"][0]["method"] = "heat-trace"
    rc = cli.main(["compute", "--config", write(tmp_path, doc), "--out", str(tmp_path)])
    assert rc == 2
    err = capsys.readouterr().err
    assert "exact" in err and "heat-trace" in err


def test_sweep_even_dimension_refused(tmp_path, capsys):
    doc = json.loads(json.dumps(BASE))
    doc["jobs"] = [{"command": "sweep", "spec": "t2", "sweep": "metric", "samples": [0.0, 0.1]}]
    rc = cli.main(["sweep", "--config", write(tmp_path, doc), "--out", str(tmp_path)])
    assert rc == 1
    assert "relative" in capsys.readouterr().err


def test_sweep_circle_and_gauge(tmp_path):
    doc = json.loads(json.dumps(BASE))
    doc["jobs"] = [
        {"command": "sweep", "spec": "circ", "sweep": "metric", "samples": [-0.2, 0.0, 0.2],
         "output": "m"},
        {"command": "sweep", "spec": "t3", "sweep": "gauge", "samples": [0.0, 1.0],
         "generator": [[0.0]], "output": "g"},
    ]
    out = tmp_path / "o"
    rc = cli.main(["sweep", "--config", write(tmp_path, doc), "--out", str(out)])
    assert rc == 0
    rows = (out / "m.csv").read_text().splitlines()
    assert rows[0] == "index,s,log_tau,err" and len(rows) == 4
    g = (out / "g.csv").read_text().splitlines()[1:]
    assert len({r.split(",")[2] for r in g}) == 1
    assert json.loads((out / "m.verdict.json").read_text())["pass"] is True


def test_verify_empty_and_corrupted(tmp_path, capsys, caplog):
    doc = json.loads(json.dumps(BASE))
    doc["suites"] = []
    assert cli.main(["verify", "--config", write(tmp_path, doc), "--out", str(tmp_path)]) == 0
    assert "empty" in caplog.text
    doc["suites"] = [{"name": "circle", "expected": 0.4}]
    rc = cli.main(["verify", "--config", write(tmp_path, doc), "--out", str(tmp_path)])
    assert rc == 2
    summary = json.loads((tmp_path / "verify.json").read_text())
    assert summary["failed"] == ["circle"]
    doc["suites"] = ["circle"]
    assert cli.main(["verify", "--config", write(tmp_path, doc), "--out", str(tmp_path)]) == 0
    doc["suites"] = ["nope"]
    assert cli.main(["verify", "--config", write(tmp_path, doc), "--out", str(tmp_path)]) == 1


def test_oracle(capsys):
    assert cli.main(["oracle", "eta", "--tau", "0+1i"]) == 0
    assert capsys.readouterr().out.strip() == format(math.gamma(0.25) / (2 * math.pi ** 0.75), ".12g")
    assert cli.main(["oracle", "kronecker", "--u", "0.5", "--v", "0", "--tau", "0+1i"]) == 0
    assert float(capsys.readouterr().out) > 0
    assert cli.main(["oracle", "zeta42"]) == 1
    assert "eta" in capsys.readouterr().err
    assert cli.main(["oracle", "kronecker", "--u", "0", "--v", "0"]) == 1


def test_threads_env(monkeypatch):
    monkeypatch.setenv("TORSIONLAB_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(2) == 2
    monkeypatch.delenv("TORSIONLAB_THREADS")
    assert resolve_threads(None) == 1
