"""Command line behaviour: exit codes, output files, flag plumbing."""

import json
import numpy as np
import pytest
from PIL import Image

from conftest import build_strip_scene, build_two_view_scene
from protomap import cli
from protomap.otf import read_otf, write_otf
from protomap.ply import read_ply, write_ply


def run_cli(args):
    return cli.main([str(a) for a in args])


def test_segment2d_writes_mask_and_report(tmp_path, capsys):
    manifest, _ = build_strip_scene(tmp_path)
    out = tmp_path / "out"
    code = run_cli(["segment2d", "--manifest", manifest, "--out", out])
    assert code == 0
    captured = capsys.readouterr()
    assert "wrote" in captured.out
    assert "seconds=" in captured.err
    # timing is console-only: no report field may carry it
    report = json.loads((out / "report.json").read_text())
    assert "seconds" not in json.dumps(report)
    assert report["mode"] == "segment2d"
    assert report["metrics"]["iou"] == 1.0
    mask = np.asarray(Image.open(out / "mask.png"))
    assert mask.shape == (64, 64)
    assert set(np.unique(mask)) <= {0, 255}


def test_invalid_tau_exits_2(tmp_path, capsys):
    manifest, _ = build_strip_scene(tmp_path)
    code = run_cli(
        ["segment2d", "--manifest", manifest, "--out", tmp_path / "o", "--tau", "1.5"]
    )
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_missing_token_file_exits_3_with_no_partial_output(tmp_path, capsys):
    manifest, _ = build_strip_scene(tmp_path)
    (tmp_path / "vl.otf").unlink()
    out = tmp_path / "out"
    code = run_cli(["segment2d", "--manifest", manifest, "--out", out])
    assert code == 3
    assert "error:" in capsys.readouterr().err
    # failures must not leave half-written results behind
    assert not out.exists() or not any(out.iterdir())


def test_failing_refiner_exits_4(tmp_path, capsys):
    manifest, _ = build_strip_scene(tmp_path)
    code = run_cli(
        [
            "segment2d",
            "--manifest",
            manifest,
            "--out",
            tmp_path / "o",
            "--refiner",
            "false",  # /usr/bin/false: exits 1 without writing the mask
        ]
    )
    assert code == 4
    err = capsys.readouterr().err
    assert "refiner" in err


def test_broken_manifest_json_exits_3(tmp_path, capsys):
    bad = tmp_path / "scene.json"
    bad.write_text("{not json")
    code = run_cli(["segment2d", "--manifest", bad, "--out", tmp_path / "o"])
    assert code == 3
    assert "error:" in capsys.readouterr().err


def test_unknown_prompt_name_exits_2(tmp_path, capsys):
    manifest, _ = build_strip_scene(tmp_path)
    code = run_cli(
        [
            "segment2d",
            "--manifest",
            manifest,
            "--out",
            tmp_path / "o",
            "--prompts-pos",
            "no_such_prompt",
        ]
    )
    assert code == 2
    assert "no_such_prompt" in capsys.readouterr().err


def test_prompt_names_reassign_roles(tmp_path):
    # manifest marks p0 positive; query p2 instead and the mask must move
    manifest, ids = build_strip_scene(tmp_path)
    out = tmp_path / "out"
    code = run_cli(
        [
            "segment2d",
            "--manifest",
            manifest,
            "--out",
            out,
            "--prompts-pos",
            "p2",
            "--prompts-neg",
            "p0",
            "p1",
            "p3",
        ]
    )
    assert code == 0
    mask = np.asarray(Image.open(out / "mask.png")) != 0
    cols = np.where(mask.any(axis=0))[0]
    # strip 2 covers token columns 8..11 of 16 -> pixel columns 32..47, and the
    # interpolated edge stays >= 0.5 for one extra pixel on the right (48.3 is
    # where it crosses), so the mask runs exactly 32..48
    assert cols.min() == 32 and cols.max() == 48
    report = json.loads((out / "report.json").read_text())
    assert report["prompts"] == {"positive": ["p2"], "negative": ["p0", "p1", "p3"]}


def test_scene_vocabulary_prompt_names(tmp_path):
    # off-road-style vocabularies are plain manifest names, nothing special
    manifest, _ = build_strip_scene(tmp_path)
    scene = json.loads(manifest.read_text())
    names = ["gravel", "road", "dirt", "sky", "grass", "forest"]
    base = {p["name"]: p for p in scene["prompts"]}
    embeddings = [base["p0"], base["p1"], base["p2"], base["p3"]]
    scene["prompts"] = [
        dict(embeddings[i % 4], name=names[i], role="positive" if i < 3 else "negative")
        for i in range(6)
    ]
    manifest.write_text(json.dumps(scene))
    code = run_cli(
        [
            "segment2d",
            "--manifest",
            manifest,
            "--out",
            tmp_path / "out",
            "--prompts-pos",
            "gravel",
            "road",
            "dirt",
            "--prompts-neg",
            "sky",
            "grass",
            "forest",
        ]
    )
    assert code == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["prompts"]["positive"] == ["gravel", "road", "dirt"]


def test_tau_sweep_masks_shrink_monotonically(tmp_path):
    manifest, _ = build_strip_scene(tmp_path, noise=0.05, seed=3)
    counts = []
    masks = []
    for tau in (0.1, 0.3, 0.5, 0.7, 0.9):
        out = tmp_path / f"out_{tau}"
        assert run_cli(
            ["segment2d", "--manifest", manifest, "--out", out, "--tau", tau]
        ) == 0
        mask = np.asarray(Image.open(out / "mask.png")) != 0
        counts.append(int(mask.sum()))
        masks.append(mask)
    assert counts == sorted(counts, reverse=True)
    # raising tau only ever removes pixels, never adds them
    for lo, hi in zip(masks[1:], masks[:-1]):
        assert not np.any(lo & ~hi)


def test_cli_flags_override_manifest_params(tmp_path):
    manifest, _ = build_strip_scene(tmp_path)
    out = tmp_path / "out"
    assert run_cli(
        ["segment2d", "--manifest", manifest, "--out", out, "--d", 8, "--cr", 2]
    ) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["params"]["d"] == 8
    assert report["params"]["c_r"] == 2
    assert read_otf(out / "similarity.otf").shape == (8, 8)


def test_preset_applies_under_manifest_params(tmp_path):
    # manifest pins d=16, so the large preset's d=32 must lose
    manifest, _ = build_strip_scene(tmp_path)
    out = tmp_path / "out"
    assert run_cli(
        ["segment2d", "--manifest", manifest, "--out", out, "--preset", "large"]
    ) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["params"]["d"] == 16


def test_reconstruct3d_query_round_trip(tmp_path, capsys):
    manifest = build_two_view_scene(tmp_path)
    grid_dir = tmp_path / "grid"
    assert run_cli(["reconstruct3d", "--manifest", manifest, "--out", grid_dir]) == 0
    meta = json.loads((grid_dir / "grid_meta.json").read_text())
    assert meta["cells"] > 0
    capsys.readouterr()

    q_out = tmp_path / "query"
    code = run_cli(
        [
            "query",
            "--grid",
            grid_dir,
            "--prompts-pos",
            tmp_path / "q0.otf",
            "--prompts-neg",
            tmp_path / "q1.otf",
            "--out",
            q_out,
        ]
    )
    assert code == 0
    labels = read_otf(q_out / "labels.otf")
    assert labels.shape == (meta["cells"],)
    assert set(np.unique(labels)) <= {0.0, 1.0}
    assert labels.sum() > 0
    pts, colors = read_ply(q_out / "labels.ply")
    assert len(pts) == meta["cells"]
    assert len(np.unique(colors, axis=0)) >= 2


def test_reconstruct3d_skips_frames_without_depth(tmp_path, capsys):
    manifest = build_two_view_scene(tmp_path)
    scene = json.loads(manifest.read_text())
    del scene["frames"][1]["depth"]
    manifest.write_text(json.dumps(scene))
    assert run_cli(["reconstruct3d", "--manifest", manifest, "--out", tmp_path / "g"]) == 0
    err = capsys.readouterr().err
    assert "skip" in err
    report = json.loads((tmp_path / "g" / "report.json").read_text())
    assert report["frames_used"] == [0]
    assert report["frames_skipped"] == [1]


def test_reconstruct3d_all_frames_unusable_exits_2(tmp_path, capsys):
    manifest = build_two_view_scene(tmp_path)
    scene = json.loads(manifest.read_text())
    for frame in scene["frames"]:
        del frame["depth"]
    manifest.write_text(json.dumps(scene))
    code = run_cli(["reconstruct3d", "--manifest", manifest, "--out", tmp_path / "g"])
    assert code == 2
    assert "usable depth" in capsys.readouterr().err


def test_depth_range_flags_drop_far_cells(tmp_path, capsys):
    manifest = build_two_view_scene(tmp_path, depth_value=200.0)
    code = run_cli(
        [
            "reconstruct3d",
            "--manifest",
            manifest,
            "--out",
            tmp_path / "g",
            "--depth-max",
            150,
        ]
    )
    # every depth sits past the cap, so no frame has a single valid cell
    assert code == 2
    assert "usable depth" in capsys.readouterr().err


def test_query_is_repeatable_byte_for_byte(tmp_path, capsys):
    manifest = build_two_view_scene(tmp_path)
    grid_dir = tmp_path / "grid"
    assert run_cli(["reconstruct3d", "--manifest", manifest, "--out", grid_dir]) == 0
    outs = []
    for name in ("q_a", "q_b"):
        out = tmp_path / name
        assert run_cli(
            [
                "query",
                "--grid",
                grid_dir,
                "--prompts-pos",
                tmp_path / "q0.otf",
                "--out",
                out,
            ]
        ) == 0
        outs.append(out)
    capsys.readouterr()
    for fname in ("labels.ply", "similarity.otf", "labels.otf", "report.json"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


def test_eval_2d_reports_hand_checked_percentages(tmp_path, capsys):
    pred = np.zeros((4, 4), np.uint8)
    gt = np.zeros((4, 4), np.uint8)
    pred[0, :3] = 255  # 3 predicted
    gt[0, 1:] = 255  # 3 true: overlap 2 -> tp=2 fp=1 fn=1
    Image.fromarray(pred).save(tmp_path / "pred.png")
    Image.fromarray(gt).save(tmp_path / "gt.png")
    code = run_cli(
        [
            "eval",
            "--mode",
            "2d",
            "--pred",
            tmp_path / "pred.png",
            "--gt",
            tmp_path / "gt.png",
            "--out",
            tmp_path / "out",
        ]
    )
    assert code == 0
    line = capsys.readouterr().out
    assert "iou=50.00" in line and "fsc=66.67" in line
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["metrics"]["iou"] == pytest.approx(0.5)


def test_eval_3d_matches_inline_projection_oracle(tmp_path, capsys):
    rng = np.random.default_rng(11)
    gt_pts = rng.normal(size=(100, 3)).astype(np.float32)
    gt_lab = (rng.random(100) < 0.5).astype(np.float32)
    pred_pts = (gt_pts + rng.normal(scale=0.01, size=gt_pts.shape)).astype(np.float32)
    pred_lab = (rng.random(100) < 0.5).astype(np.float32)

    write_ply(gt_pts, tmp_path / "gt.ply", colors=np.zeros((100, 3), np.uint8))
    write_ply(pred_pts, tmp_path / "pred.ply", colors=np.zeros((100, 3), np.uint8))
    write_otf(tmp_path / "gt.otf", gt_lab)
    write_otf(tmp_path / "pred.otf", pred_lab)

    code = run_cli(
        [
            "eval",
            "--mode",
            "3d",
            "--pred-points",
            tmp_path / "pred.ply",
            "--pred-labels",
            tmp_path / "pred.otf",
            "--gt-points",
            tmp_path / "gt.ply",
            "--gt-labels",
            tmp_path / "gt.otf",
            "--k",
            1,
            "--out",
            tmp_path / "out",
        ]
    )
    assert code == 0
    capsys.readouterr()

    # brute-force nearest-neighbour transfer of the ground-truth labels
    d2 = ((pred_pts[:, None, :] - gt_pts[None, :, :]) ** 2).sum(axis=2)
    projected = gt_lab[np.argmin(d2, axis=1)]
    pred_b = pred_lab != 0
    proj_b = projected != 0
    tp = int(np.sum(pred_b & proj_b))
    fp = int(np.sum(pred_b & ~proj_b))
    fn = int(np.sum(~pred_b & proj_b))
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["metrics"]["iou"] == pytest.approx(tp / (tp + fp + fn))


def test_eval_missing_required_flag_exits_2(tmp_path, capsys):
    code = run_cli(["eval", "--mode", "3d", "--pred-points", tmp_path / "x.ply"])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_stage_name_prefixes_pipeline_errors(tmp_path, capsys):
    # corrupt the vl tokens after manifest load succeeds: failure names the stage
    manifest, _ = build_strip_scene(tmp_path)
    (tmp_path / "vl.otf").write_bytes(b"OTF9garbage")
    code = run_cli(["segment2d", "--manifest", manifest, "--out", tmp_path / "o"])
    assert code == 3
    assert "stage load" in capsys.readouterr().err
