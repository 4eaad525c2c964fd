import subprocess
import sys

import numpy as np
import pytest

from ocai import flowio, synth
from ocai.cli import main

DISK = """\
width=128
height=96
background=0.2
shape kind=disk center=43.5,47.5 size=12 intensity=0.85 displacement=40,0 depth=0
"""


@pytest.fixture
def scene_dir(tmp_path):
    spec = tmp_path / "disk.txt"
    spec.write_text(DISK)
    out = tmp_path / "out"
    assert main(["synth", "--scene", str(spec), "--t-list", "0,0.5,1", "--out-dir", str(out)]) == 0
    return out


def _interp_args(d, t, out):
    return [
        "interpolate",
        "--frame0", str(d / "frame_0.000.png"),
        "--frame1", str(d / "frame_1.000.png"),
        "--flow01", str(d / "flow_01.flo"),
        "--flow10", str(d / "flow_10.flo"),
        "--t", str(t),
        "--out-frame", str(out),
    ]


def test_synth_inventory_and_determinism(tmp_path, scene_dir):
    names = sorted(p.name for p in scene_dir.iterdir())
    assert names == [
        "flow_01.flo", "flow_10.flo", "flow_t0_0.500.flo", "flow_t1_0.500.flo",
        "frame_0.000.png", "frame_0.500.png", "frame_1.000.png", "occ_01.png", "occ_10.png",
    ]
    again = tmp_path / "again"
    assert main(["synth", "--scene", str(tmp_path / "disk.txt"), "--t-list", "0,0.5,1", "--out-dir", str(again)]) == 0
    for name in names:
        assert (again / name).read_bytes() == (scene_dir / name).read_bytes()


def test_synth_bad_spec(tmp_path, capsys):
    spec = tmp_path / "bad.txt"
    spec.write_text(DISK.replace("center=43.5", "center=3"))
    assert main(["synth", "--scene", str(spec), "--t-list", "0", "--out-dir", str(tmp_path / "o")]) == 2
    assert "line 4" in capsys.readouterr().err


def test_synth_bad_t_list(tmp_path):
    spec = tmp_path / "s.txt"
    spec.write_text(DISK)
    assert main(["synth", "--scene", str(spec), "--t-list", "0,2", "--out-dir", str(tmp_path / "o")]) == 4


def test_interpolate_endpoint_round_trip(tmp_path, scene_dir, capsys):
    out = tmp_path / "t0.png"
    assert main(_interp_args(scene_dir, 0, out)) == 0
    assert out.read_bytes() == (scene_dir / "frame_0.000.png").read_bytes()
    line = capsys.readouterr().out.strip()
    assert line.startswith("t=0.0000") and "holes_t0=0" in line


def test_interpolate_disk_quality(tmp_path, scene_dir, capsys):
    out = tmp_path / "mid.png"
    assert main(_interp_args(scene_dir, 0.5, out) + ["--out-flow-t0", str(tmp_path / "f0.flo"),
                                                     "--out-conf-t1", str(tmp_path / "c1.png")]) == 0
    assert (tmp_path / "f0.flo").exists() and (tmp_path / "c1.png").exists()
    capsys.readouterr()
    assert main(["metrics", "--ref", str(scene_dir / "frame_0.500.png"), "--test", str(out)]) == 0
    fields = dict(kv.split("=") for kv in capsys.readouterr().out.split())
    assert float(fields["psnr"]) >= 40.0


def test_interpolate_errors(tmp_path, scene_dir):
    args = _interp_args(scene_dir, 0.5, tmp_path / "x.png")
    i = args.index("--flow10")
    with pytest.raises(SystemExit) as exc:
        main(args[:i] + args[i + 2 :])
    assert exc.value.code == 2
    bad = list(args)
    bad[i + 1] = str(tmp_path / "missing.flo")
    assert main(bad) == 2
    assert main(_interp_args(scene_dir, 1.5, tmp_path / "x.png")) == 4
    flowio.save_flo(tmp_path / "small.flo", np.zeros((4, 4, 2)))
    bad[i + 1] = str(tmp_path / "small.flo")
    assert main(bad) == 3
    (tmp_path / "corrupt.flo").write_bytes(b"nope")
    bad[i + 1] = str(tmp_path / "corrupt.flo")
    assert main(bad) == 2


def test_config_precedence(tmp_path, scene_dir, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("alpha=500\n")
    assert main(_interp_args(scene_dir, 0.5, tmp_path / "x.png") + ["--config", str(cfg)]) == 4
    assert main(_interp_args(scene_dir, 0.5, tmp_path / "x.png") + ["--config", str(cfg), "--alpha", "10"]) == 0
    cfg.write_text("alpha=10\n")
    assert main(_interp_args(scene_dir, 0.5, tmp_path / "x.png") + ["--config", str(cfg), "--alpha", "0"]) == 4


def test_warp_backward_zero_flow(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, (6, 5, 3)) / 255.0
    flowio.save_image(tmp_path / "a.png", img)
    flowio.save_flo(tmp_path / "z.flo", np.zeros((6, 5, 2)))
    assert main(["warp", "--mode", "backward", "--src", str(tmp_path / "a.png"), "--flow", str(tmp_path / "z.flo"),
                 "--out", str(tmp_path / "b.png")]) == 0
    assert np.array_equal(flowio.load_image(tmp_path / "b.png"), flowio.load_image(tmp_path / "a.png"))


def test_warp_forward_writes_holes(tmp_path, scene_dir):
    assert main(["warp", "--mode", "forward", "--src", str(scene_dir / "frame_0.000.png"),
                 "--flow", str(scene_dir / "flow_01.flo"), "--flow-bwd", str(scene_dir / "flow_10.flo"),
                 "--out", str(tmp_path / "fw.png"), "--out-holes", str(tmp_path / "h.png")]) == 0
    assert flowio.load_image(tmp_path / "h.png").max() == 1.0


def test_confidence_of_negated_pair_is_white(tmp_path):
    flow = np.zeros((8, 8, 2), np.float32)
    flow[..., 0] = 2.0
    flowio.save_flo(tmp_path / "f.flo", flow)
    flowio.save_flo(tmp_path / "b.flo", -flow)
    assert main(["confidence", "--flow-fwd", str(tmp_path / "f.flo"), "--flow-bwd", str(tmp_path / "b.flo"),
                 "--out", str(tmp_path / "c.png")]) == 0
    np.testing.assert_array_equal(flowio.load_image(tmp_path / "c.png"), 1.0)


def test_occlusion_outputs(tmp_path, scene_dir):
    assert main(["occlusion", "--flow-fwd", str(scene_dir / "flow_01.flo"), "--flow-bwd", str(scene_dir / "flow_10.flo"),
                 "--out", str(tmp_path / "o.png"), "--out-weight", str(tmp_path / "w.png")]) == 0
    occ = flowio.load_image(tmp_path / "o.png")
    truth = synth.ground_truth_occlusion(synth.parse_scene(DISK), 0, 1)
    assert (occ[..., 0] == truth).mean() >= 0.99


def test_flowviz_zero_is_white(tmp_path):
    flowio.save_flo(tmp_path / "z.flo", np.zeros((3, 4, 2)))
    assert main(["flowviz", "--flow", str(tmp_path / "z.flo"), "--out", str(tmp_path / "v.png")]) == 0
    np.testing.assert_array_equal(flowio.load_image(tmp_path / "v.png"), 1.0)
    assert main(["flowviz", "--flow", str(tmp_path / "z.flo"), "--out", str(tmp_path / "v.png"), "--max-norm", "-1"]) == 4


def test_metrics_lines(tmp_path, capsys):
    a = np.full((16, 16, 1), 0.2)
    flowio.save_image(tmp_path / "a.png", a)
    flowio.save_image(tmp_path / "b.pgm", np.full((16, 16, 1), 0.6))
    flowio.save_flo(tmp_path / "f.flo", np.ones((16, 16, 2)))
    assert main(["metrics", "--ref", str(tmp_path / "a.png"), "--test", str(tmp_path / "a.png"),
                 "--flow-ref", str(tmp_path / "f.flo"), "--flow-test", str(tmp_path / "f.flo")]) == 0
    assert capsys.readouterr().out.strip() == "psnr=99.0000 ssim=1.0000 epe=0.0000 fl_all=0.0000"
    assert main(["metrics", "--ref", str(tmp_path / "a.png"), "--test", str(tmp_path / "b.pgm")]) == 0
    assert capsys.readouterr().out.startswith("psnr=7.9588")
    assert main(["metrics", "--ref", str(tmp_path / "a.png")]) == 2


def test_malformed_config_is_input_error(tmp_path, scene_dir):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("alpha=ten\n")
    assert main(_interp_args(scene_dir, 0.5, tmp_path / "x.png") + ["--config", str(cfg)]) == 2


def test_module_entry_point(tmp_path):
    flowio.save_flo(tmp_path / "z.flo", np.zeros((3, 4, 2)))
    proc = subprocess.run([sys.executable, "-m", "ocai", "flowviz", "--flow", str(tmp_path / "z.flo"),
                           "--out", str(tmp_path / "v.png")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
