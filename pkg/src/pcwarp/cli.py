"""Command-line interface.

Each subcommand is a thin wrapper over the library: it loads the named
files, calls the corresponding function with them verbatim, and writes the
results. Exit codes: 0 on success, 1 on bad input (including unknown
flags), 2 on internal errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback

import numpy as np

from . import fileio
from .errors import InputError
from .geometry import OrbitPose, backproject, pose_from_orbit
from .losses import l1_metric, ssim
from .multiview import ViewRecord, fuse_clouds, reconstruct_360
from .oracle import render
from .warping import SymmetryPlane, backward_warp, coarse_view, forward_warp


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors: exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _emit(args, summary: dict):
    if getattr(args, "json", False):
        print(json.dumps(summary, separators=(",", ":")))


def _parse_orbit(text: str) -> OrbitPose:
    """Parse "az=20,el=10,r=3" into an orbit pose."""
    fields = {}
    for part in text.split(","):
        if "=" not in part:
            raise InputError(f"bad orbit component {part!r} in {text!r}")
        key, value = part.split("=", 1)
        try:
            fields[key.strip()] = float(value)
        except ValueError as exc:
            raise InputError(f"bad orbit value {part!r} in {text!r}") from exc
    try:
        return OrbitPose(
            azimuth=fields["az"], elevation=fields["el"], radius=fields["r"]
        )
    except KeyError as exc:
        raise InputError(f"orbit string needs az=, el=, r= (missing {exc})") from exc


def _parse_symmetry(text: str) -> SymmetryPlane:
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError as exc:
        raise InputError(f"bad symmetry plane {text!r}") from exc
    if len(parts) != 4:
        raise InputError("symmetry plane must be 'nx,ny,nz,offset'")
    return SymmetryPlane(normal=(parts[0], parts[1], parts[2]), offset=parts[3])


def _mask_path(out_path: str) -> str:
    stem, dot, ext = out_path.rpartition(".")
    return f"{stem}.mask.{ext}" if dot else f"{out_path}.mask"


def _load_views(args) -> list[ViewRecord]:
    k = fileio.load_intrinsics(args.k)
    views = []
    for img_path, depth_path, pose_path in args.view:
        views.append(
            ViewRecord(
                image=fileio.load_image(img_path),
                depth=fileio.load_depth(depth_path),
                k=k,
                pose=fileio.load_view_pose(pose_path),
            )
        )
    return views


def _cmd_backproject(args) -> int:
    cloud = backproject(
        fileio.load_depth(args.depth),
        fileio.load_intrinsics(args.k),
        fileio.load_image(args.input),
    )
    fileio.save_ply(cloud, args.out, binary=args.binary)
    _emit(args, {"points": len(cloud)})
    return 0


def _cmd_warp_forward(args) -> int:
    view = forward_warp(
        fileio.load_image(args.input),
        fileio.load_depth(args.depth),
        fileio.load_intrinsics(args.k),
        fileio.load_pose(args.pose),
    )
    fileio.save_image(args.out, view.rgb)
    if args.mask_out:
        fileio.save_image(args.mask_out, fileio.mask_to_image(view.coverage))
    _emit(args, {"covered": view.coverage_count()})
    return 0


def _cmd_warp_backward(args) -> int:
    image, mask = backward_warp(
        fileio.load_image(args.target),
        fileio.load_depth(args.depth),
        fileio.load_intrinsics(args.k),
        fileio.load_pose(args.pose),
    )
    fileio.save_image(args.out, image)
    if args.mask_out:
        fileio.save_image(args.mask_out, fileio.mask_to_image(mask))
    _emit(args, {"valid": int(np.count_nonzero(mask))})
    return 0


def _cmd_coarse(args) -> int:
    view = coarse_view(
        fileio.load_image(args.input),
        fileio.load_depth(args.depth),
        fileio.load_intrinsics(args.k),
        fileio.load_pose(args.pose),
        cull=args.cull,
        eps=args.eps,
        symmetry=_parse_symmetry(args.symmetry) if args.symmetry else None,
        symmetry_frame=fileio.load_pose(args.symmetry_frame) if args.symmetry_frame else None,
    )
    fileio.save_image(args.out, view.rgb)
    mask_path = args.mask_out or _mask_path(args.out)
    fileio.save_image(mask_path, fileio.mask_to_image(view.coverage))
    _emit(args, {"covered": view.coverage_count(), "mask": mask_path})
    return 0


def _cmd_metrics(args) -> int:
    a = fileio.load_image(args.a)
    b = fileio.load_image(args.b)
    record = {"l1": l1_metric(a, b), "ssim": ssim(a, b)[0]}
    if args.json:
        print(json.dumps(record, separators=(",", ":")))
    else:
        print(f"l1={record['l1']:.6f} ssim={record['ssim']:.6f}")
    return 0


def _cmd_fuse(args) -> int:
    cloud = fuse_clouds(_load_views(args), reference=args.reference)
    fileio.save_ply(cloud, args.out, binary=args.binary)
    _emit(args, {"points": len(cloud), "views": len(args.view)})
    return 0


def _cmd_recon360(args) -> int:
    cloud = reconstruct_360(_load_views(args), prune=args.prune)
    fileio.save_ply(cloud, args.out, binary=args.binary)
    _emit(args, {"points": len(cloud), "views": len(args.view)})
    return 0


def _cmd_render(args) -> int:
    if (args.orbit is None) == (args.pose is None):
        raise InputError("render needs exactly one of --orbit or --pose")
    pose = (
        pose_from_orbit(_parse_orbit(args.orbit))
        if args.orbit
        else fileio.load_pose(args.pose)
    )
    image, depth, _ = render(
        fileio.load_scene(args.scene), fileio.load_intrinsics(args.k), pose
    )
    fileio.save_image(args.out, image)
    if args.depth_out:
        fileio.save_depth(args.depth_out, depth)
    _emit(args, {"valid_depth": depth.valid_count()})
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="pcwarp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_common(p, *, pose=True):
        p.add_argument("--depth", required=True, help="source depth map (PFM)")
        p.add_argument("--k", required=True, help="intrinsics JSON")
        if pose:
            p.add_argument("--pose", required=True, help="relative pose JSON")
        p.add_argument("--out", required=True, help="output path")
        p.add_argument("--json", action="store_true", help="print a JSON summary")

    p = sub.add_parser("backproject", help="depth + image to a PLY point cloud")
    p.add_argument("--in", dest="input", required=True, help="source image (PNG)")
    add_common(p, pose=False)
    p.add_argument("--binary", action="store_true", help="binary PLY instead of ascii")
    p.set_defaults(func=_cmd_backproject)

    p = sub.add_parser("warp-forward", help="splat the source image into the target view")
    p.add_argument("--in", dest="input", required=True, help="source image (PNG)")
    add_common(p)
    p.add_argument("--mask-out", help="write the coverage mask PNG here")
    p.set_defaults(func=_cmd_warp_forward)

    p = sub.add_parser("warp-backward", help="reconstruct the source view from the target image")
    p.add_argument("--target", required=True, help="target image (PNG)")
    add_common(p)
    p.add_argument("--mask-out", help="write the validity mask PNG here")
    p.set_defaults(func=_cmd_warp_backward)

    p = sub.add_parser("coarse", help="occlusion-aware sparse target view")
    p.add_argument("--in", dest="input", required=True, help="source image (PNG)")
    add_common(p)
    p.add_argument("--cull", action="store_true", help="remove back-facing points")
    p.add_argument("--eps", type=float, default=0.0, help="backface threshold")
    p.add_argument("--symmetry", help="mirror plane 'nx,ny,nz,offset'")
    p.add_argument("--symmetry-frame", help="pose JSON mapping camera to plane frame")
    p.add_argument("--mask-out", help="coverage mask path (default: <out>.mask.png)")
    p.set_defaults(func=_cmd_coarse)

    p = sub.add_parser("metrics", help="L1 and SSIM between two images")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--json", action="store_true", help="print a JSON record")
    p.set_defaults(func=_cmd_metrics)

    for name, func, extra in (
        ("fuse", _cmd_fuse, None),
        ("recon360", _cmd_recon360, "prune"),
    ):
        p = sub.add_parser(name, help=f"{name}: combine views into one point cloud")
        p.add_argument(
            "--view",
            nargs=3,
            action="append",
            required=True,
            metavar=("IMAGE", "DEPTH", "POSE"),
            help="one input view: image PNG, depth PFM, camera-to-world pose JSON",
        )
        p.add_argument("--k", required=True, help="intrinsics JSON (shared)")
        p.add_argument("--out", required=True, help="output PLY")
        p.add_argument("--binary", action="store_true")
        p.add_argument("--json", action="store_true")
        if name == "fuse":
            p.add_argument("--reference", type=int, default=0, help="reference view index")
        if extra == "prune":
            p.add_argument("--prune", action="store_true", help="drop nearest-neighbor outliers")
        p.set_defaults(func=func)

    p = sub.add_parser("render", help="render an analytic scene")
    p.add_argument("--scene", required=True, help="scene JSON")
    p.add_argument("--k", required=True, help="intrinsics JSON")
    p.add_argument("--orbit", help="camera orbit 'az=20,el=10,r=3'")
    p.add_argument("--pose", help="world-to-camera pose JSON")
    p.add_argument("--out", required=True, help="output image PNG")
    p.add_argument("--depth-out", help="output depth PFM")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_render)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (InputError, FileNotFoundError) as exc:
        sys.stderr.write(f"pcwarp: error: {exc}\n")
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
