import json
import os
import shutil
import pandas as pd
import pytest
from PIL import Image
from groupseg.cli import main
from groupseg.metrics import EvalReport
from groupseg.presets import toy_schema
from groupseg.schema import save_schema


MODEL_CONFIG = "width 4\nlevels 2\nmode gss\n"
TRAIN_CONFIG = "learning_rate 0.01\nbatch_size 5\nepochs 3\n"


def _gen(out, seed=3):
    return main(["--quiet", "--threads", "1", "gen", "--schema", "toy", "--scene", "toy", "--scenes", "12", "--size", "16", "--seed", str(seed), "--out", str(out)])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert _gen(root / "data") == 0
    (root / "model.cfg").write_text(MODEL_CONFIG)
    (root / "train.cfg").write_text(TRAIN_CONFIG)
    code = main(["--quiet", "--threads", "1", "train", "--data", str(root / "data"), "--model-config", str(root / "model.cfg"), "--train-config", str(root / "train.cfg"), "--epochs", "1", "--out", str(root / "run")])
    assert code == 0
    return root


def test_gen_layout(workspace):
    data = workspace / "data"
    manifest = json.loads((data / "manifest.json").read_text())
    splits = [entry["split"] for entry in manifest["samples"]]
    assert splits.count("train") == 10
    assert splits.count("test") == 2
    assert (data / "schema.cfg").is_file()
    for entry in manifest["samples"]:
        assert (data / entry["file"]).is_file()
    run = json.loads((data / "run_gen.json").read_text())
    assert run["command"] == "gen"
    assert run["seeds"] == {"dataset": 3}
    assert set(run["config_hashes"]) == {"schema", "scene"}
    assert set(run) == {"command", "args", "config_hashes", "seeds", "version", "outputs", "wall_clock_seconds"}


def test_gen_deterministic(workspace, tmp_path):
    assert _gen(tmp_path / "again") == 0
    first = workspace / "data"
    second = tmp_path / "again"
    assert (first / "manifest.json").read_bytes() == (second / "manifest.json").read_bytes()
    for entry in json.loads((first / "manifest.json").read_text())["samples"]:
        assert (first / entry["file"]).read_bytes() == (second / entry["file"]).read_bytes()
    first_run = json.loads((first / "run_gen.json").read_text())
    second_run = json.loads((second / "run_gen.json").read_text())
    assert first_run["config_hashes"] == second_run["config_hashes"]


def test_gen_missing_schema(tmp_path):
    assert main(["gen", "--schema", str(tmp_path / "missing.cfg"), "--out", str(tmp_path / "data")]) == 1
    assert not (tmp_path / "data").exists()


def test_train_artifacts(workspace):
    run = workspace / "run"
    assert (run / "checkpoint.gssm").is_file()
    history = [json.loads(line) for line in (run / "history.jsonl").read_text().splitlines()]
    assert len(history) == 1
    assert history[0]["steps"] == 2
    manifest = json.loads((run / "run_train.json").read_text())
    assert manifest["command"] == "train"
    assert set(manifest["config_hashes"]) == {"schema", "model", "train"}
    assert manifest["seeds"] == {"train": 0, "dataset": 3}


def test_eval_oracle(workspace, tmp_path):
    paths = [str(tmp_path / name) for name in ("a.json", "b.json")]
    for path in paths:
        assert main(["--quiet", "--threads", "1", "eval", "--data", str(workspace / "data"), "--oracle", "--out", path]) == 0
    report = EvalReport.load(paths[0])
    assert report.mode == "oracle"
    assert report.data["samples"] == 2
    for name in ("pa_vis", "miou_vis", "pa_pres_normalized", "miou_pres", "pa_pres_void_normalized", "miou_pres_void"):
        assert report[name] == 1.0
    with open(paths[0], "rb") as a, open(paths[1], "rb") as b:
        assert a.read() == b.read()
    assert json.loads(open(paths[0] + ".run.json").read())["command"] == "eval"


def test_eval_checkpoint(workspace, tmp_path):
    path = str(tmp_path / "gss.json")
    assert main(["--quiet", "--threads", "1", "eval", "--data", str(workspace / "data"), "--checkpoint", str(workspace / "run" / "checkpoint.gssm"), "--out", path]) == 0
    report = EvalReport.load(path)
    assert report.mode == "gss"
    assert report.data["plausibility"]["applicable"]
    assert 0.0 <= report["pa_vis"] <= 1.0


def test_eval_errors(workspace, tmp_path):
    data = workspace / "data"
    assert main(["eval", "--data", str(tmp_path / "nowhere"), "--oracle", "--out", str(tmp_path / "r.json")]) == 1
    assert main(["eval", "--data", str(data), "--out", str(tmp_path / "r.json")]) == 1
    assert main(["eval", "--data", str(data), "--checkpoint", str(tmp_path / "missing.gssm"), "--out", str(tmp_path / "r.json")]) == 1

    other = tmp_path / "other"
    shutil.copytree(str(data), str(other))
    save_schema(toy_schema(void_in_background=True), str(other / "schema.cfg"))
    code = main(["eval", "--data", str(other), "--checkpoint", str(workspace / "run" / "checkpoint.gssm"), "--out", str(tmp_path / "r.json")])
    assert code == 1
    assert not (tmp_path / "r.json").exists()


def _first_sample(workspace):
    manifest = json.loads((workspace / "data" / "manifest.json").read_text())
    return str(workspace / "data" / manifest["samples"][0]["file"])


def test_render(workspace, tmp_path):
    out = tmp_path / "images"
    assert main(["--quiet", "render", "--sample", _first_sample(workspace), "--schema", "toy", "--out", str(out)]) == 0
    images = sorted(name for name in os.listdir(str(out)) if not name.endswith(".json"))
    assert images == ["depth.pgm", "group_0_background.ppm", "group_1_furniture.ppm", "group_2_props.ppm", "visible.ppm"]
    assert len(images) == toy_schema().group_count + 2
    with Image.open(str(out / "visible.ppm")) as image:
        assert image.size == (16, 16)
        assert image.mode == "RGB"
    with Image.open(str(out / "depth.pgm")) as image:
        assert image.mode == "L"


def test_render_prediction(workspace, tmp_path):
    out = tmp_path / "images"
    assert main(["--quiet", "render", "--sample", _first_sample(workspace), "--checkpoint", str(workspace / "run" / "checkpoint.gssm"), "--out", str(out)]) == 0
    names = set(os.listdir(str(out)))
    assert {"pred_visible.ppm", "pred_group_0_background.ppm", "pred_group_1_furniture.ppm", "pred_group_2_props.ppm"} <= names
    outputs = json.loads((out / "run_render.json").read_text())["outputs"]
    assert len(outputs) == 2 * (toy_schema().group_count + 1) + 1


def test_render_schema_mismatch(workspace, tmp_path):
    assert main(["render", "--sample", _first_sample(workspace), "--schema", "suncg", "--out", str(tmp_path / "images")]) == 1


def test_compare(workspace, tmp_path, capsys):
    oracle = str(tmp_path / "oracle.json")
    gss = str(tmp_path / "gss.json")
    assert main(["--quiet", "--threads", "1", "eval", "--data", str(workspace / "data"), "--oracle", "--out", oracle]) == 0
    assert main(["--quiet", "--threads", "1", "eval", "--data", str(workspace / "data"), "--checkpoint", str(workspace / "run" / "checkpoint.gssm"), "--out", gss]) == 0
    capsys.readouterr()
    csv = str(tmp_path / "table.csv")
    assert main(["--quiet", "compare", oracle, gss, "--out", csv]) == 0
    printed = capsys.readouterr().out
    assert "MIoU pres (void)" in printed
    table = pd.read_csv(csv, index_col=0)
    assert list(table.index) == ["ORACLE", "GSS"]
    assert table.loc["ORACLE", "PA vis"] == pytest.approx(1.0)


def test_compare_unreadable(tmp_path):
    (tmp_path / "broken.json").write_text("{")
    assert main(["compare", str(tmp_path / "broken.json")]) == 1
    assert main(["compare", str(tmp_path / "missing.json")]) == 1


def test_usage_errors():
    assert main(["frobnicate"]) == 1
    assert main(["train"]) == 1
    assert main(["eval", "--data", "x", "--out", "y", "--pooling", "median"]) == 1


def test_render_help_names_output_count(capsys):
    with pytest.raises(SystemExit) as info:
        main(["render", "--help"])
    assert info.value.code == 0
    text = " ".join(capsys.readouterr().out.split())
    assert "group count + 2 images per sample" in text


def test_unwritable_output_is_a_runtime_failure(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory")
    assert _gen(blocker / "data", seed=1) == 2
    assert blocker.read_text() == "not a directory"
