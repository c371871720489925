import json
from pathlib import Path

import numpy as np
import pytest

from circgpr.cli import main
from circgpr.store import read_grid, validate_manifest


@pytest.fixture()
def tiny_cfg_file(tmp_path) -> Path:
    cfg = {
        "sim": {"spacing": 0.004, "duration": 6e-9},
        "scan": {"n_traces": 12},
        "ranges": {"object_radius": [0.14, 0.16], "defect_radius": [0.03, 0.05]},
        "workers": 2,
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture(scope="module")
def generated(tmp_path_factory) -> Path:
    """One tiny end-to-end dataset, reused by the read-only CLI tests."""
    tmp = tmp_path_factory.mktemp("cli_ds")
    cfg = {
        "sim": {"spacing": 0.004, "duration": 6e-9},
        "scan": {"n_traces": 12},
        "ranges": {"object_radius": [0.14, 0.16], "defect_radius": [0.03, 0.05]},
        "workers": 2,
    }
    cfg_path = tmp / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp / "ds"
    rc = main(["gen", "--config", str(cfg_path), "-n", "2", "--seed0", "0",
               "--out", str(out)])
    assert rc == 0
    return out


def test_gen_writes_valid_manifest(generated):
    manifest = validate_manifest(generated / "manifest.json")
    assert len(manifest["samples"]) == 2
    sample = manifest["samples"][0]
    for key in ("eps_defect", "eps_medium_ssim", "eps_medium_entropy", "eps_rms"):
        assert key in sample["labels"]
    assert (generated / "labels.csv").exists()
    assert (generated / "eps_medium_hist.png").exists()


def test_gen_default_sweep_is_protocol_grid(generated):
    manifest = validate_manifest(generated / "manifest.json")
    eps = manifest["samples"][0]["aft"]["ssim_curve"]["eps"]
    assert eps == [2.5 + 0.5 * i for i in range(16)]


def test_network_input_is_128(generated):
    manifest = validate_manifest(generated / "manifest.json")
    net = read_grid(generated / manifest["samples"][0]["files"]["network_input"])
    assert net.shape == (128, 128)


def test_migrate_cli_roundtrip(generated, tmp_path):
    manifest = validate_manifest(generated / "manifest.json")
    sample = manifest["samples"][0]
    scene_path = tmp_path / "scene.json"
    scene_path.write_text(json.dumps(sample["scene"]))
    out = tmp_path / "img.f32grid"
    rc = main(["migrate",
               "--bscan", str(generated / sample["files"]["migration_bscan"]),
               "--eps", "6.0", "--outline", str(scene_path), "--out", str(out)])
    assert rc == 0
    img = read_grid(out)
    assert img.shape == (128, 128)
    meta = json.loads(out.with_suffix(".meta.json").read_text())
    assert meta["eps_medium_used"] == 6.0
    assert out.with_suffix(".pgm").exists()


def test_migrate_cli_zero_bscan_zero_image(generated, tmp_path):
    from circgpr.pipeline import read_bscan, write_bscan

    manifest = validate_manifest(generated / "manifest.json")
    sample = manifest["samples"][0]
    b = read_bscan(generated / sample["files"]["migration_bscan"])
    b.traces[:] = 0.0
    zpath = tmp_path / "zero.f32grid"
    write_bscan(b, zpath)
    scene_path = tmp_path / "scene.json"
    scene_path.write_text(json.dumps(sample["scene"]))
    out = tmp_path / "img.f32grid"
    rc = main(["migrate", "--bscan", str(zpath), "--eps", "6.0",
               "--outline", str(scene_path), "--out", str(out)])
    assert rc == 0
    assert np.abs(read_grid(out)).max() == 0.0


def test_migrate_cli_missing_file_exit_2(tmp_path):
    rc = main(["migrate", "--bscan", str(tmp_path / "nope.f32grid"),
               "--eps", "6.0", "--outline", str(tmp_path / "nope.json"),
               "--out", str(tmp_path / "o.f32grid")])
    assert rc == 2


def test_evaluate_perfect_predictions(generated, tmp_path):
    manifest = validate_manifest(generated / "manifest.json")
    preds = {}
    for sample in manifest["samples"]:
        preds[sample["id"]] = {
            "eps_defect": sample["labels"]["eps_defect"],
            "eps_medium": sample["labels"]["eps_medium_ssim"],
        }
    ppath = tmp_path / "preds.json"
    ppath.write_text(json.dumps(preds))
    out = tmp_path / "report.json"
    rc = main(["evaluate", "--manifest", str(generated / "manifest.json"),
               "--predictions", str(ppath), "--out", str(out)])
    assert rc == 0
    report = json.loads(out.read_text())
    assert report["aggregate"]["mae_defect"] == 0.0
    assert report["aggregate"]["mre_defect"] == 0.0
    assert report["aggregate"]["mae_medium"] == 0.0
    assert len(report["per_sample"]) == 2
    assert out.with_suffix(".csv").exists()
    assert out.with_suffix(".png").exists()


def test_evaluate_empty_predictions_exit_1(generated, tmp_path):
    ppath = tmp_path / "preds.json"
    ppath.write_text("{}")
    rc = main(["evaluate", "--manifest", str(generated / "manifest.json"),
               "--predictions", str(ppath), "--out", str(tmp_path / "r.json")])
    assert rc == 1
    report = json.loads((tmp_path / "r.json").read_text())
    assert len(report["missing"]) == 2


def test_render_pgm_and_png(generated, tmp_path):
    manifest = validate_manifest(generated / "manifest.json")
    grid = generated / manifest["samples"][0]["files"]["migrated_image"]
    assert main(["render", "--grid", str(grid), "--out", str(tmp_path / "x.pgm")]) == 0
    assert main(["render", "--grid", str(grid), "--out", str(tmp_path / "x.png")]) == 0
    assert (tmp_path / "x.pgm").exists() and (tmp_path / "x.png").exists()


def test_simulate_preprocess_autofocus_chain(tiny_cfg_file, tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--config", str(tiny_cfg_file), "--seed", "4",
                 "--out", str(out)]) == 0
    assert (out / "bscan_raw.f32grid").exists()
    assert (out / "scene.json").exists()

    mig = out / "mig.f32grid"
    assert main(["preprocess", "--config", str(tiny_cfg_file),
                 "--bscan", str(out / "bscan_raw.f32grid"),
                 "--reference", str(out / "reference.f32grid"),
                 "--path", "migration", "--out", str(mig)]) == 0

    net = out / "net.f32grid"
    assert main(["preprocess", "--config", str(tiny_cfg_file),
                 "--bscan", str(out / "bscan_raw.f32grid"),
                 "--reference", str(out / "reference.f32grid"),
                 "--path", "network", "--out", str(net)]) == 0
    assert read_grid(net).shape == (128, 128)

    assert main(["autofocus", "--config", str(tiny_cfg_file),
                 "--bscan", str(mig), "--scene", str(out / "scene.json"),
                 "--out", str(out)]) == 0
    doc = json.loads((out / "autofocus.json").read_text())
    assert "ssim" in doc and "entropy" in doc
    assert (out / "autofocus.png").exists()
    assert (out / "migrated_selected.f32grid").exists()


def test_help_exits_zero(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0


def test_unknown_flag_exits_64():
    with pytest.raises(SystemExit) as exc:
        main(["gen", "--bogus"])
    assert exc.value.code == 64


def test_missing_subcommand_exits_64():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 64
