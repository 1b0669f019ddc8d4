import json

import numpy as np
import pytest

from scenes import synthetic_scene, with_one_hot_scores, write_fixture_set
from vecmap.cli import main
from vecmap.evaluation import ScoredElement
from vecmap.geometry import MapClass
from vecmap.io import Scene, write_scene


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_eval_perfect(tmp_path, rng, capsys):
    paths = write_fixture_set(tmp_path, rng)
    code, out, _ = run(["eval", *paths, "--out", tmp_path / "o"], capsys)
    assert code == 0
    report = json.loads((tmp_path / "o" / "eval_report.json").read_text())
    assert report["mAP"] == 1.0
    assert "mAP\t1.000000000000" in out
    assert (tmp_path / "o" / "eval_report.txt").read_text() == out


def test_eval_offset_two_thirds(tmp_path, rng, capsys):
    paths = write_fixture_set(tmp_path, rng, offset=0.3)
    code, _, _ = run(["eval", *paths, "--out", tmp_path / "o"], capsys)
    assert code == 0
    report = json.loads((tmp_path / "o" / "eval_report.json").read_text())
    for value in report["class_ap"].values():
        assert value == pytest.approx(2 / 3, abs=1e-9)


def test_eval_corrupted_file_named(tmp_path, rng, capsys, fixtures):
    paths = write_fixture_set(tmp_path, rng)
    bad = fixtures / "invalid" / "truncated_json.jsonl"
    code, _, err = run(["eval", *paths, bad, "--out", tmp_path / "o"], capsys)
    assert code == 3
    assert "truncated_json.jsonl" in err
    assert not (tmp_path / "o").exists()


def test_eval_validation_error_code(tmp_path, capsys, fixtures):
    code, _, err = run(["eval", fixtures / "invalid" / "unknown_class.jsonl"], capsys)
    assert code == 4 and "class error" in err


def test_eval_without_predictions(tmp_path, capsys, fixtures):
    code, _, err = run(["eval", fixtures / "golden_scene.jsonl", "--out", tmp_path], capsys)
    assert code == 5 and "predictions" in err


def test_eval_missing_file(tmp_path, capsys):
    code, _, err = run(["eval", tmp_path / "nope.jsonl"], capsys)
    assert code == 6 and "nope.jsonl" in err


def test_eval_custom_thresholds(tmp_path, rng, capsys):
    paths = write_fixture_set(tmp_path, rng, count=1, offset=0.3)
    code, _, _ = run(["eval", *paths, "--thresholds", "0.1,0.2", "--out", tmp_path / "o"], capsys)
    assert code == 0
    report = json.loads((tmp_path / "o" / "eval_report.json").read_text())
    assert report["mAP"] == 0.0
    code, _, _ = run(["eval", *paths, "--thresholds", "1.0,0.5"], capsys)
    assert code == 4


def _loss_fixture(tmp_path, rng, offset=0.0, counts=None):
    scene = with_one_hot_scores(synthetic_scene(rng, "loss", counts=counts, offset=offset))
    path = tmp_path / "loss.jsonl"
    write_scene(scene, path)
    return path, scene


def test_loss_perfect(tmp_path, rng, capsys):
    path, scene = _loss_fixture(tmp_path, rng)
    code, out, _ = run(["loss", path, "--out", tmp_path / "o"], capsys)
    assert code == 0
    r = json.loads((tmp_path / "o" / "loss_report.json").read_text())
    assert r["loss"]["cls"] == 0.0 and r["loss"]["p2p"] == 0.0
    assert r["loss"]["dir"] == pytest.approx(-r["edge_count"], abs=1e-12)
    assert r["edge_count"] == 20 + 3 * 19
    assert len(r["matching"]) == len(scene.ground_truth)
    assert "total" in out


def test_loss_translation_in_metres(tmp_path, rng, capsys):
    path, scene = _loss_fixture(tmp_path, rng, counts={MapClass.DIVIDER: 2})
    delta = np.array([0.25, -0.5])
    moved = [ScoredElement(p.element.with_points(p.element.points + delta), p.score, p.class_scores)
             for p in scene.predictions]
    write_scene(Scene("t", scene.frame, scene.ground_truth, moved), path)
    code, _, _ = run(["loss", path, "--units", "meters", "--lambda-d", "0", "--out", tmp_path / "o"], capsys)
    assert code == 0
    r = json.loads((tmp_path / "o" / "loss_report.json").read_text())
    assert r["loss"]["p2p"] == pytest.approx(20 * 2 * 0.75, abs=1e-12)


def test_loss_gradcheck(tmp_path, rng, capsys):
    path, _ = _loss_fixture(tmp_path, rng, offset=0.2)
    code, out, _ = run(["loss", path, "--gradcheck", "--trials", "20", "--out", tmp_path / "o"], capsys)
    assert code == 0
    r = json.loads((tmp_path / "o" / "loss_report.json").read_text())
    assert r["gradcheck"]["random_max_rel_error"] < 1e-5
    assert r["gradcheck"]["scene_max_rel_error"] < 1e-5
    assert "gradcheck" in out


def test_loss_needs_predictions(capsys, fixtures):
    code, _, _ = run(["loss", fixtures / "golden_scene.jsonl"], capsys)
    assert code == 5


def test_bench_default_exponents(tmp_path, capsys):
    code, out, _ = run(["bench-attention", "--out", tmp_path], capsys)
    assert code == 0
    macs = json.loads((tmp_path / "bench_macs.json").read_text())
    assert abs(macs["exponents"]["vanilla"] - 2.0) <= 0.1
    assert abs(macs["exponents"]["decoupled"] - 1.5) <= 0.1
    assert abs(macs["exponents"]["criss_cross"] - 1.5) <= 0.1
    assert len(macs["rows"]) == 9
    assert "exponent vanilla" in out


def test_bench_single_kernel(tmp_path, capsys):
    code, _, _ = run(["bench-attention", "--kernels", "decoupled", "--dim", "8", "--out", tmp_path], capsys)
    assert code == 0
    macs = json.loads((tmp_path / "bench_macs.json").read_text())
    assert {r["kernel"] for r in macs["rows"]} == {"decoupled"}
    assert list(macs["exponents"]) == ["decoupled"]


@pytest.mark.parametrize("argv", [
    ["bench-attention", "--sizes", "10x10,20x20"],
    ["bench-attention", "--sizes", "10x10,20x20,40x30"],
    ["bench-attention", "--sizes", "ten"],
    ["bench-attention", "--kernels", "axial"],
    ["eval"],
    ["frobnicate"],
    ["eval", "x.jsonl", "--no-such-flag"],
    [],
])
def test_usage_errors(argv, capsys, tmp_path):
    code, _, err = run(argv + ["--out", tmp_path] if argv[:1] == ["bench-attention"] else argv, capsys)
    assert code == 2
    assert err


def test_render_gt_only(tmp_path, capsys, fixtures):
    code, out, _ = run(["render", fixtures / "golden_scene.jsonl", "--out", tmp_path], capsys)
    assert code == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["golden_gt.ppm"]
    assert (tmp_path / "golden_gt.ppm").read_bytes() == (fixtures / "golden_gt.ppm").read_bytes()


def test_render_gt_and_pred(tmp_path, capsys, fixtures):
    code, _, _ = run(["render", fixtures / "golden_scene_pred.jsonl", "--out", tmp_path], capsys)
    assert code == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["golden_pred_gt.ppm", "golden_pred_pred.ppm"]


def test_render_invalid(tmp_path, capsys, fixtures):
    code, _, err = run(["render", fixtures / "invalid" / "polygon_two_points.jsonl", "--out", tmp_path], capsys)
    assert code == 4 and "geometry" in err
