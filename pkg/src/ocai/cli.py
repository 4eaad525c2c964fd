"""Command-line interface.

Exit codes: 0 success, 2 input error (missing/unreadable/malformed file or
bad flags), 3 raster size mismatch, 4 invalid parameter value.

Parameters resolve as command-line flag, then ``--config`` file, then the
built-in defaults.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import flowio, metrics, synth
from .consistency import confidence_map, occlusion_map, occlusion_weight_mask
from .core import PipelineConfig, ShapeMismatchError
from .interpolate import interpolate
from .warp import backward_warp, softmax_splat

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SHAPE = 3
EXIT_PARAM = 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _read(loader, path):
    if path is None:
        return None
    try:
        return loader(path)
    except FileNotFoundError:
        raise CliError(f"no such file: {path}", EXIT_INPUT) from None
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_INPUT) from None
    except ValueError as exc:
        raise CliError(f"{path}: {exc}", EXIT_INPUT) from None


def _write(saver, path, value):
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        saver(path, value)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_INPUT) from None


def _is_flo(path) -> bool:
    return Path(path).suffix.lower() == ".flo"


def _config(args) -> PipelineConfig:
    overrides = {}
    if getattr(args, "config", None):
        try:
            overrides = PipelineConfig.parse_text(Path(args.config).read_text())
        except OSError as exc:
            raise CliError(f"cannot read config {args.config}: {exc}", EXIT_INPUT) from None
        except ValueError as exc:
            raise CliError(f"{args.config}: {exc}", EXIT_INPUT) from None
    if getattr(args, "alpha", None) is not None:
        overrides["alpha"] = args.alpha
    try:
        return PipelineConfig(**overrides)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_PARAM) from None


def cmd_interpolate(args) -> int:
    cfg = _config(args)
    if not 0.0 <= args.t <= 1.0:
        raise CliError(f"--t must be in [0, 1], got {args.t}", EXIT_PARAM)
    i0 = _read(flowio.load_image, args.frame0)
    i1 = _read(flowio.load_image, args.frame1)
    v01 = _read(flowio.load_flo, args.flow01)
    v10 = _read(flowio.load_flo, args.flow10)
    if i0.shape[2] != i1.shape[2]:
        raise CliError("frames differ in channel count", EXIT_SHAPE)
    out = interpolate(i0, i1, v01, v10, args.t, cfg)

    _write(flowio.save_image, args.out_frame, out.frame_t)
    for path, flow in ((args.out_flow_t0, out.flow_t0), (args.out_flow_t1, out.flow_t1)):
        if path:
            _write(flowio.save_flo, path, flow)
    for path, conf in ((args.out_conf_t0, out.conf_t0), (args.out_conf_t1, out.conf_t1)):
        if path:
            _write(flowio.save_image, path, conf)
    print(
        f"t={args.t:.4f} holes_t0={int(out.holes_t0.sum())} holes_t1={int(out.holes_t1.sum())} "
        f"size={i0.shape[1]}x{i0.shape[0]}"
    )
    return EXIT_OK


def cmd_warp(args) -> int:
    cfg = _config(args)
    loader = flowio.load_flo if _is_flo(args.src) else flowio.load_image
    src = _read(loader, args.src)
    flow = _read(flowio.load_flo, args.flow)
    if args.mode == "backward":
        out = backward_warp(src, flow)
        holes = None
    else:
        weight = np.zeros(flow.shape[:2], np.float32)
        if args.flow_bwd:
            flow_bwd = _read(flowio.load_flo, args.flow_bwd)
            weight = occlusion_weight_mask(occlusion_map(flow, flow_bwd, cfg), flow, cfg)
        result = softmax_splat(src, flow, weight, cfg)
        out, holes = result.values, result.holes
    if _is_flo(args.out):
        if out.shape[-1] != 2:
            raise CliError("only flow fields can be written to .flo", EXIT_INPUT)
        _write(flowio.save_flo, args.out, out)
    else:
        if out.shape[-1] not in (1, 3):
            raise CliError("flow fields must be written to .flo", EXIT_INPUT)
        _write(flowio.save_image, args.out, np.clip(out, 0.0, 1.0))
    if holes is not None and args.out_holes:
        _write(flowio.save_image, args.out_holes, holes)
    n_holes = 0 if holes is None else int(holes.sum())
    print(f"mode={args.mode} holes={n_holes}")
    return EXIT_OK


def cmd_confidence(args) -> int:
    cfg = _config(args)
    fwd = _read(flowio.load_flo, args.flow_fwd)
    bwd = _read(flowio.load_flo, args.flow_bwd)
    conf = confidence_map(fwd, bwd, cfg)
    _write(flowio.save_image, args.out, conf)
    print(f"confidence_mean={float(conf.mean()):.6f} above_tau={int((conf >= cfg.tau).sum())}")
    return EXIT_OK


def cmd_occlusion(args) -> int:
    cfg = _config(args)
    fwd = _read(flowio.load_flo, args.flow_fwd)
    bwd = _read(flowio.load_flo, args.flow_bwd)
    occ = occlusion_map(fwd, bwd, cfg)
    _write(flowio.save_image, args.out, occ)
    if args.out_weight:
        weight = occlusion_weight_mask(occ, fwd, cfg)
        _write(flowio.save_image, args.out_weight, weight / cfg.alpha)
    print(f"occluded={int(occ.sum())}")
    return EXIT_OK


def cmd_flowviz(args) -> int:
    flow = _read(flowio.load_flo, args.flow)
    if args.max_norm is not None and args.max_norm <= 0:
        raise CliError("--max-norm must be positive", EXIT_PARAM)
    _write(flowio.save_image, args.out, flowio.flow_to_color(flow, args.max_norm))
    return EXIT_OK


def cmd_metrics(args) -> int:
    if (args.ref is None) != (args.test is None) or (args.flow_ref is None) != (args.flow_test is None):
        raise CliError("--ref/--test and --flow-ref/--flow-test come in pairs", EXIT_INPUT)
    if args.ref is None and args.flow_ref is None:
        raise CliError("nothing to compare: give --ref/--test and/or --flow-ref/--flow-test", EXIT_INPUT)
    parts = []
    if args.ref is not None:
        ref = _read(flowio.load_image, args.ref)
        test = _read(flowio.load_image, args.test)
        if ref.shape != test.shape:
            raise CliError(f"image shapes differ: {ref.shape} vs {test.shape}", EXIT_SHAPE)
        try:
            parts += [f"psnr={metrics.psnr(ref, test):.4f}", f"ssim={metrics.ssim(ref, test):.4f}"]
        except ValueError as exc:
            raise CliError(str(exc), EXIT_SHAPE) from None
    if args.flow_ref is not None:
        fref = _read(flowio.load_flo, args.flow_ref)
        ftest = _read(flowio.load_flo, args.flow_test)
        epe, fl_all = metrics.endpoint_error(ftest, fref)
        parts += [f"epe={epe:.4f}", f"fl_all={fl_all:.4f}"]
    print(" ".join(parts))
    return EXIT_OK


def _t_tag(t: float) -> str:
    return f"{t:.3f}"


def cmd_synth(args) -> int:
    try:
        scene = synth.load_scene(args.scene)
    except FileNotFoundError:
        raise CliError(f"no such file: {args.scene}", EXIT_INPUT) from None
    except synth.SceneSpecError as exc:
        raise CliError(f"{args.scene}: {exc}", EXIT_INPUT) from None
    try:
        ts = [float(x) for x in args.t_list.split(",") if x.strip()]
    except ValueError:
        raise CliError(f"--t-list must be comma-separated numbers, got {args.t_list!r}", EXIT_PARAM) from None
    if not ts or any(not 0.0 <= t <= 1.0 for t in ts):
        raise CliError("--t-list values must lie in [0, 1]", EXIT_PARAM)

    out = Path(args.out_dir)
    ext = args.format
    _write(flowio.save_flo, out / "flow_01.flo", synth.ground_truth_flow(scene, 0.0, 1.0))
    _write(flowio.save_flo, out / "flow_10.flo", synth.ground_truth_flow(scene, 1.0, 0.0))
    _write(flowio.save_image, out / f"occ_01.{ext}", synth.ground_truth_occlusion(scene, 0.0, 1.0))
    _write(flowio.save_image, out / f"occ_10.{ext}", synth.ground_truth_occlusion(scene, 1.0, 0.0))
    for t in ts:
        tag = _t_tag(t)
        _write(flowio.save_image, out / f"frame_{tag}.{ext}", synth.render(scene, t))
        if 0.0 < t < 1.0:
            _write(flowio.save_flo, out / f"flow_t0_{tag}.flo", synth.ground_truth_flow(scene, t, 0.0))
            _write(flowio.save_flo, out / f"flow_t1_{tag}.flo", synth.ground_truth_flow(scene, t, 1.0))
    print(f"wrote scene {scene.width}x{scene.height} with {len(scene.shapes)} shapes, t={','.join(map(_t_tag, ts))}")
    return EXIT_OK


def _add_config_flags(p):
    p.add_argument("--config", help="key=value file with PipelineConfig fields")
    p.add_argument("--alpha", type=float, help="occlusion weighting coefficient (overrides --config)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ocai", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("interpolate", help="synthesise the frame and flows at time t")
    p.add_argument("--frame0", required=True)
    p.add_argument("--frame1", required=True)
    p.add_argument("--flow01", required=True)
    p.add_argument("--flow10", required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--out-frame", required=True)
    p.add_argument("--out-flow-t0")
    p.add_argument("--out-flow-t1")
    p.add_argument("--out-conf-t0")
    p.add_argument("--out-conf-t1")
    _add_config_flags(p)
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("warp", help="backward warp or softmax-splat an image or flow")
    p.add_argument("--mode", choices=("backward", "forward"), default="backward")
    p.add_argument("--src", required=True, help="image or .flo to warp")
    p.add_argument("--flow", required=True)
    p.add_argument("--flow-bwd", help="reverse flow; forward mode then weights splats by the occlusion mask")
    p.add_argument("--out", required=True)
    p.add_argument("--out-holes", help="forward mode: write the hole mask here")
    _add_config_flags(p)
    p.set_defaults(func=cmd_warp)

    p = sub.add_parser("confidence", help="forward-backward confidence map")
    p.add_argument("--flow-fwd", required=True)
    p.add_argument("--flow-bwd", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_confidence)

    p = sub.add_parser("occlusion", help="occlusion map and occlusion-aware weighting mask")
    p.add_argument("--flow-fwd", required=True)
    p.add_argument("--flow-bwd", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--out-weight", help="weighting mask divided by alpha, as an image")
    _add_config_flags(p)
    p.set_defaults(func=cmd_occlusion)

    p = sub.add_parser("flowviz", help="colour-code a .flo file")
    p.add_argument("--flow", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-norm", type=float, help="fixed normalisation magnitude in px")
    p.set_defaults(func=cmd_flowviz)

    p = sub.add_parser("metrics", help="PSNR/SSIM between images and EPE/Fl-all between flows")
    p.add_argument("--ref")
    p.add_argument("--test")
    p.add_argument("--flow-ref")
    p.add_argument("--flow-test")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("synth", help="render a synthetic scene with ground truth")
    p.add_argument("--scene", required=True)
    p.add_argument("--t-list", required=True, help="comma-separated times, e.g. 0,0.5,1")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", choices=("png", "pgm"), default="png")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"ocai {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except ShapeMismatchError as exc:
        print(f"ocai {args.command}: {exc}", file=sys.stderr)
        return EXIT_SHAPE


if __name__ == "__main__":
    sys.exit(main())
