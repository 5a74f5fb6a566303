import json

import pytest

from prompkls import formats
from prompkls.cli import main

SCENARIO = {
    "seed": 11,
    "participants": 2,
    "stimuli": ["Sham", "tACS"],
    "session_phases": ["erst", "prae", "post1"],
    "experiments": [1, 6],
}


@pytest.fixture(scope="module")
def study(tmp_path_factory):
    root = tmp_path_factory.mktemp("study")
    (root / "scenario.json").write_text(json.dumps(SCENARIO))
    assert main(["synth", "--scenario", str(root / "scenario.json"), "--out", str(root / "data")]) == 0
    return root


@pytest.fixture(scope="module")
def sets(study):
    out = study / "sets"
    assert main(["segment", "--manifest", str(study / "data" / "manifest.json"), "--out", str(out)]) == 0
    return out


def _set(sets, name):
    return str(sets / f"{name}.csv")


def test_synth_manifest(study):
    manifest = formats.read_manifest(study / "data" / "manifest.json")
    assert len(manifest.recordings) == 2 * 2 * 3 * 2
    assert all(e.path.exists() for e in manifest.recordings)


def test_segment(sets):
    assert len(list(sets.glob("*.csv"))) == 48 and len(list(sets.glob("*.json"))) == 48
    data = formats.read_trajectory_set(_set(sets, "p01_Sham_prae_e1_inward"))
    assert data.values.shape == (20, 6, 101)
    assert data.metadata["session_phase"] == "prae"


def test_fit(sets, tmp_path):
    out = tmp_path / "model.json"
    assert main(["fit", "--set", _set(sets, "p01_Sham_prae_e1_inward"), "--out", str(out)]) == 0
    model = formats.read_model(out)
    assert model.basis.num_basis == 20 and model.weight_cov.shape == (120, 120)
    assert main(["fit", "--set", _set(sets, "p01_Sham_prae_e1_inward"), "--out", str(out),
                 "--num-basis", "8"]) == 0
    assert formats.read_model(out).basis.num_basis == 8


def test_compare(sets, capsys):
    a = _set(sets, "p02_tACS_prae_e6_outward")
    assert main(["compare", "--a", a, "--b", a]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "D_KLS = 0"
    assert [line.split()[0] for line in lines[1:]] == ["hand_x", "hand_y", "hand_z", "wrist_x", "wrist_y", "wrist_z"]
    assert main(["compare", "--a", a, "--b", _set(sets, "p02_tACS_post1_e6_outward")]) == 0
    assert float(capsys.readouterr().out.splitlines()[0].split("=")[1]) > 0


def test_window(sets, tmp_path):
    out = tmp_path / "curve.csv"
    assert main(["window", "--a", _set(sets, "p01_Sham_prae_e1_inward"),
                 "--b", _set(sets, "p01_Sham_post1_e1_inward"), "--fraction", "0.2", "--out", str(out)]) == 0
    curve = formats.read_curve_csv(out)
    assert len(curve.values) == 81
    assert out.read_text().splitlines()[0] == "center_phase,kls"


def test_batch_null_and_deterministic(study, capsys):
    manifest = str(study / "data" / "manifest.json")
    assert main(["batch", "--manifest", manifest, "--out", str(study / "r1.json")]) == 0
    assert main(["batch", "--manifest", manifest, "--out", str(study / "r2.json"), "--workers", "2"]) == 0
    assert "16 comparisons" in capsys.readouterr().out
    r1 = (study / "r1.json").read_bytes()
    r2 = (study / "r2.json").read_bytes()
    doc1, doc2 = json.loads(r1), json.loads(r2)
    assert doc1["entries"] == doc2["entries"] and doc1["summary"] == doc2["summary"]
    assert not any(e["outlier"] for e in doc1["entries"])
    assert main(["batch", "--manifest", manifest, "--out", str(study / "r3.json")]) == 0
    assert (study / "r3.json").read_bytes() == r1
    assert (study / "r1.csv").read_text().splitlines()[0] == "stimulus,post_phase,direction,mean,std"
    assert doc1["header"]["rng_seed"] == 0 and doc1["header"]["recordings"] == 24


def test_recon_loss(study):
    out = study / "table.csv"
    assert main(["recon-loss", "--manifest", str(study / "data" / "manifest.json"), "--m", "5,10,15,20",
                 "--out", str(out)]) == 0
    rows = formats.read_sweep_csv(out)
    losses = [r.loss_mean for r in rows]
    assert [r.num_basis for r in rows] == [5, 10, 15, 20]
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_config_file(sets, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("num_basis = 6\n")
    out = tmp_path / "m.json"
    assert main(["fit", "--config", str(cfg), "--set", _set(sets, "p01_Sham_prae_e1_inward"), "--out", str(out)]) == 0
    assert formats.read_model(out).basis.num_basis == 6


class TestExitCodes:
    def test_usage(self, capsys):
        assert main([]) == 1
        assert main(["frobnicate"]) == 1
        assert main(["fit", "--set", "x.csv"]) == 1
        assert main(["recon-loss", "--manifest", "m.json", "--m", "5,x", "--out", "t.csv"]) == 1

    def test_bad_config_writes_nothing(self, study, tmp_path):
        out = tmp_path / "r.json"
        manifest = str(study / "data" / "manifest.json")
        assert main(["batch", "--manifest", manifest, "--out", str(out), "--num-basis", "0"]) == 1
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("window_fraction = 3\n")
        assert main(["batch", "--config", str(cfg), "--manifest", manifest, "--out", str(out)]) == 1
        assert main(["batch", "--config", str(tmp_path / "none.cfg"), "--manifest", manifest, "--out", str(out)]) == 1
        assert not out.exists()

    def test_data_errors(self, tmp_path):
        assert main(["batch", "--manifest", str(tmp_path / "missing.json"), "--out", str(tmp_path / "r.json")]) == 2
        (tmp_path / "m.json").write_text("{not json")
        assert main(["batch", "--manifest", str(tmp_path / "m.json"), "--out", str(tmp_path / "r.json")]) == 2
        (tmp_path / "s.json").write_text('{"stimuli": ["Zap"]}')
        assert main(["synth", "--scenario", str(tmp_path / "s.json"), "--out", str(tmp_path / "d")]) == 2

    def test_pipeline_error(self, tmp_path, capsys):
        scenario = dict(SCENARIO, participants=1, stimuli=["Sham"], experiments=[1],
                        scenario={"num_strokes": 20})
        (tmp_path / "s.json").write_text(json.dumps(scenario))
        assert main(["synth", "--scenario", str(tmp_path / "s.json"), "--out", str(tmp_path / "d")]) == 0
        manifest = str(tmp_path / "d" / "manifest.json")
        assert main(["segment", "--manifest", manifest, "--out", str(tmp_path / "sets")]) == 3
        assert "need 21 strokes" in capsys.readouterr().err
        # batch records the failures as corrupted and still succeeds
        assert main(["batch", "--manifest", manifest, "--out", str(tmp_path / "r.json")]) == 0
        assert len(json.loads((tmp_path / "r.json").read_text())["corrupted"]) == 3

    def test_window_too_narrow(self, sets):
        a = _set(sets, "p01_Sham_prae_e1_inward")
        assert main(["window", "--a", a, "--b", a, "--fraction", "0.001", "--out", "/dev/null"]) == 3
