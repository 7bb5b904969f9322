"""Command line: generate -> simulate -> collect -> reconstruct -> eval."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InputError, KinematicsError, SkinkitError
from .frustum import FrustumModel
from .geometry import fixtures
from .geometry.mesh import load_mesh, write_obj, write_stl
from .geometry.sdf import DEFAULT_VOXEL, MAX_VOXELS, OrientedBox, csg_subtract, extract_surface, voxelize_sdf
from .geometry.shell import SkinParams, offset_shell, outer_surface
from .kinematics import KinematicChain, Link, Pose, fr3_chain, load_joint_state, save_joint_state
from .placement import (
    DEFAULT_MAX_ATTEMPTS,
    PcbFootprint,
    PlacementConfig,
    SensorManifest,
    build_manifest,
    sample_poisson,
)
from .pointcloud import assemble, evaluate, read_ply, write_ply, zone_counts
from .scene import NoiseModel, Scene, simulate_capture
from .telemetry import Collector, collect, emit, read_frame_file, write_frame_file, encode_frame

log = logging.getLogger("skinkit")

EXIT_USAGE = 2
EXIT_IO = 3


def provenance(args) -> dict:
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    return {"tool": "skinkit", "version": __version__, "command": args.command, "flags": flags}


def _atomic_write(path, write):
    """Run ``write(tmp_path)`` then move into place so failures leave no partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    os.close(fd)
    try:
        write(tmp)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _write_sidecar(path, prov, extra=None):
    data = {"provenance": prov, **(extra or {})}
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    _atomic_write(str(path) + ".meta.json", lambda p: Path(p).write_text(text, encoding="utf-8"))


def _triple(text):
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    return vals


def select_region(mesh, spec):
    """``all`` | ``normal:x,y,z,deg`` | ``perp:x,y,z,deg`` | path to a JSON face-index list."""
    if spec in (None, "all"):
        return None
    kind, _, rest = spec.partition(":")
    if kind in ("normal", "perp") and rest:
        try:
            x, y, z, deg = (float(v) for v in rest.split(","))
        except ValueError:
            raise ValueError(f"bad region spec {spec!r}") from None
        axis = np.array([x, y, z])
        axis /= np.linalg.norm(axis)
        cos = mesh.face_normals @ axis
        if kind == "normal":
            faces = np.flatnonzero(cos >= np.cos(np.radians(deg)))
        else:
            faces = np.flatnonzero(np.abs(cos) <= np.sin(np.radians(deg)))
        return faces
    try:
        faces = json.loads(Path(spec).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read region file {spec}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"region file {spec} is not JSON: {exc}") from exc
    if not isinstance(faces, list):
        raise InputError("region file must hold a JSON list of face indices")
    return np.asarray(faces, dtype=np.int64)


def mount_cutters(manifest: SensorManifest, pcb: PcbFootprint, outward: float):
    """Pocket boxes: PCB-deep below each mount origin, extended ``outward`` above it."""
    boxes = []
    for s in manifest.sensors:
        pose = s.pose
        z = pose.rotation[:, 2]
        depth = pcb.depth + outward
        centre = pose.origin + z * (outward - pcb.depth) / 2
        ext = (pcb.width + 2 * pcb.clearance, pcb.height + 2 * pcb.clearance, depth)
        boxes.append(OrientedBox(pose.rotation, centre, ext))
    return boxes


# --- subcommands ------------------------------------------------------------------


def cmd_generate(args):
    cfg = PlacementConfig(args.min_sep, args.seed, args.max_attempts)
    frustum = FrustumModel(args.fov, 8, 8, args.max_range, args.min_range)
    pcb = PcbFootprint(*args.pcb, clearance=args.pcb_clearance)
    if not args.voxel > 0:
        raise ValueError("--voxel must be > 0")
    if args.max_sensors is not None and args.max_sensors < 1:
        raise ValueError("--max-sensors must be >= 1")
    mesh = load_mesh(args.mesh)
    region = select_region(mesh, args.region)
    params = SkinParams(args.gap, args.thickness, None if region is None else tuple(region))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        shell = offset_shell(mesh, params)
    for w in caught:
        log.warning("%s", w.message)
    outer = outer_surface(mesh, params)
    samples = sample_poisson(outer, None, cfg)
    if args.max_sensors is not None:
        samples = samples[: args.max_sensors]  # first in sampling order, so still seed-determined
    prov = provenance(args)
    manifest = build_manifest(samples, pcb, frustum, args.link_name,
                              skin_params={**params.to_dict(), "region_faces": len(shell.meta["source_faces"])},
                              provenance=prov)
    grid = voxelize_sdf(shell, args.voxel, max_voxels=args.max_voxels)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        carved = csg_subtract(grid, mount_cutters(manifest, pcb, params.thickness + params.gap))
    solid = extract_surface(carved)
    _atomic_write(args.out_mesh, lambda p: write_stl(solid, p, comment=f"v{__version__} seed={args.seed}"))
    _write_sidecar(args.out_mesh, prov, {"volume_m3": solid.volume, "watertight": solid.is_watertight})
    _atomic_write(args.out_manifest, manifest.save)
    print(f"sensors placed: {len(manifest.sensors)}")
    print(f"shell volume: {shell.volume:.6e} m^3  carved skin volume: {solid.volume:.6e} m^3")
    print(f"self-intersecting faces: {len(shell.meta['self_intersections'])}")
    return 0


def _load_inputs(args):
    manifest = SensorManifest.load(args.manifest)
    chain = KinematicChain.load(args.chain)
    q = load_joint_state(args.joints)
    if manifest.link_name not in chain.names:
        raise KinematicsError(f"manifest link {manifest.link_name!r} not in chain {chain.names}")
    if len(q) != chain.n_joints:
        raise KinematicsError(f"joint state has {len(q)} angles, chain has {chain.n_joints} joints")
    return manifest, chain, q


def cmd_simulate(args):
    noise = NoiseModel(args.sigma, args.seed)
    if args.frames < 0 or not args.rate > 0:
        raise ValueError("--frames must be >= 0 and --rate > 0")
    if (args.udp is None) == (args.out is None):
        raise ValueError("give exactly one of --udp or --out")
    manifest, chain, q = _load_inputs(args)
    scene = Scene.load(args.scene)
    frames = simulate_capture(scene, manifest, chain, q, args.frames, args.rate, noise,
                              supersample=args.supersample)
    prov = provenance(args)
    if args.out:
        count = {}

        def write(p):
            count["n"] = write_frame_file(frames, p)

        _atomic_write(args.out, write)
        _write_sidecar(args.out, prov, {"frames": count["n"]})
        print(f"wrote {count['n']} frames to {args.out}")
    else:
        rep = emit(frames, args.udp, args.rate)
        print(f"sent {rep.sent}/{rep.attempted} datagrams to {args.udp} ({rep.errors} errors)")
    return 0


def cmd_collect(args):
    if args.duration is None and args.max_frames is None and args.idle is None:
        raise ValueError("give --duration, --frames or --idle")
    col = Collector(args.listen)
    print(f"listening on {col.address[0]}:{col.address[1]}", flush=True)
    prov = provenance(args)

    def run(tmp):
        with open(tmp, "wb") as fh:
            # receiver thread fills the queue while this side writes
            _, stats = collect(col, args.duration, args.max_frames, args.idle,
                               on_frame=lambda fr: fh.write(encode_frame(fr)))
        run.stats = stats

    _atomic_write(args.out, run)
    stats = run.stats
    _write_sidecar(args.out, prov, {"stats": stats.to_dict()})
    if args.stats:
        text = json.dumps({"provenance": prov, **stats.to_dict()}, indent=2, sort_keys=True) + "\n"
        _atomic_write(args.stats, lambda p: Path(p).write_text(text, encoding="utf-8"))
    print(f"received {stats.total_frames} frames, {sum(stats.gaps.values())} gaps, "
          f"{stats.total_errors} decode errors")
    return 0


def cmd_reconstruct(args):
    manifest, chain, q = _load_inputs(args)
    frames = read_frame_file(args.frames)
    cloud = assemble(frames, manifest, chain, q)
    prov = provenance(args)
    zones = zone_counts(f for f in frames if f.sensor_index in manifest.by_index())
    comments = [
        "skinkit " + json.dumps(prov, sort_keys=True),
        "zones " + ",".join(f"{k}:{v}" for k, v in sorted(zones.items())),
    ]
    _atomic_write(args.out, lambda p: write_ply(cloud, p, comments, binary=args.binary))
    if not len(cloud):
        log.warning("no valid zones in %s; wrote empty cloud", args.frames)
    st = cloud.stats
    print(f"points: {len(cloud)}  sentinel zones: {st['zones_sentinel']}  "
          f"dropped frames: {st['frames_dropped_unknown_sensor']}")
    return 0


def _zones_from_comments(comments):
    for c in comments:
        if c.startswith("zones "):
            body = c[6:].strip()
            if not body:
                return {}
            out = {}
            for item in body.split(","):
                k, _, v = item.partition(":")
                out[int(k)] = int(v)
            return out
    return None


def cmd_eval(args):
    cloud = read_ply(args.cloud)
    scene = Scene.load(args.scene)
    try:
        zones = _zones_from_comments(cloud.stats.get("comments", []))
    except ValueError:
        zones = None
    report = evaluate(cloud, scene, zones)
    out = {"provenance": provenance(args), **report.to_dict()}
    text = json.dumps(out, indent=2, sort_keys=True) + "\n"
    if args.out:
        _atomic_write(args.out, lambda p: Path(p).write_text(text, encoding="utf-8"))
    g = out["global"]
    print(f"points: {g['point_count']}  rmse: {g['rmse_m'] * 1e3:.3f} mm  "
          f"max: {g['max_error_m'] * 1e3:.3f} mm  valid: {g['valid_fraction']:.3f}")
    return 0


def cmd_fixture(args):
    kind = args.kind
    meshes = {
        "cylinder": lambda: fixtures.cylinder(),
        "rectangle": lambda: fixtures.rectangle(),
        "half-cylinder": lambda: fixtures.half_cylinder(),
        "sphere": lambda: fixtures.icosphere(0.1, 3),
        "box": lambda: fixtures.box((0.1, 0.1, 0.1)),
    }
    if kind in meshes:
        m = meshes[kind]()
        writer = write_obj if str(args.out).lower().endswith(".obj") else write_stl
        _atomic_write(args.out, lambda p: writer(m, p))
    elif kind == "fr3-chain":
        _atomic_write(args.out, fr3_chain().save)
    elif kind == "link-chain":
        chain = KinematicChain([Link(args.link_name, Pose.identity(), np.array([0, 0, 1.0]))])
        _atomic_write(args.out, chain.save)
    elif kind == "joints":
        _atomic_write(args.out, lambda p: save_joint_state([0.0] * args.n_joints, p))
    print(f"wrote {kind} to {args.out}")
    return 0


# --- parser -----------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="skinkit", description=__doc__)
    p.add_argument("--version", action="version", version=f"skinkit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="build a carved skin shell and its sensor manifest")
    g.add_argument("--mesh", required=True, help="link mesh (OBJ or binary STL, meters)")
    g.add_argument("--region", default="all",
                   help="all | normal:x,y,z,deg | perp:x,y,z,deg | JSON face-index file")
    g.add_argument("--min-sep", type=float, default=0.045)
    g.add_argument("--gap", type=float, default=0.0)
    g.add_argument("--thickness", type=float, default=0.005)
    g.add_argument("--pcb", type=_triple, default=(0.0254, 0.0254, 0.003), help="w,h,d meters")
    g.add_argument("--pcb-clearance", type=float, default=0.0002)
    g.add_argument("--voxel", type=float, default=DEFAULT_VOXEL)
    g.add_argument("--max-voxels", type=int, default=MAX_VOXELS)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--max-attempts", type=int, default=DEFAULT_MAX_ATTEMPTS)
    g.add_argument("--max-sensors", type=int, help="keep only the first N placed sensors")
    g.add_argument("--fov", type=float, default=65.0, help="diagonal field of view, degrees")
    g.add_argument("--max-range", type=float, default=4.0)
    g.add_argument("--min-range", type=float, default=0.0)
    g.add_argument("--link-name", default="link5")
    g.add_argument("--out-mesh", required=True)
    g.add_argument("--out-manifest", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("simulate", help="ray-cast a scene into range frames")
    s.add_argument("--manifest", required=True)
    s.add_argument("--chain", required=True)
    s.add_argument("--joints", required=True)
    s.add_argument("--scene", required=True)
    s.add_argument("--frames", type=int, default=10)
    s.add_argument("--rate", type=float, default=15.0)
    s.add_argument("--sigma", type=float, default=5.0, help="range noise std dev, mm")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--supersample", type=int, default=1)
    s.add_argument("--udp", help="host:port to stream datagrams to")
    s.add_argument("--out", help="frame file to write")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("collect", help="receive datagrams into a frame file")
    c.add_argument("--listen", default="127.0.0.1:9000")
    c.add_argument("--duration", type=float)
    c.add_argument("--frames", dest="max_frames", type=int)
    c.add_argument("--idle", type=float, help="stop after this many idle seconds")
    c.add_argument("--out", required=True)
    c.add_argument("--stats", help="session statistics JSON")
    c.set_defaults(func=cmd_collect)

    r = sub.add_parser("reconstruct", help="frame file + manifest -> coloured PLY")
    r.add_argument("--frames", required=True)
    r.add_argument("--manifest", required=True)
    r.add_argument("--chain", required=True)
    r.add_argument("--joints", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--binary", action="store_true", help="binary little-endian PLY")
    r.set_defaults(func=cmd_reconstruct)

    e = sub.add_parser("eval", help="score a PLY against a scene")
    e.add_argument("--cloud", required=True)
    e.add_argument("--scene", required=True)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    f = sub.add_parser("fixture", help="write demo meshes and chain files")
    f.add_argument("kind", choices=["cylinder", "rectangle", "half-cylinder", "sphere", "box",
                                    "fr3-chain", "link-chain", "joints"])
    f.add_argument("--out", required=True)
    f.add_argument("--link-name", default="link5")
    f.add_argument("--n-joints", type=int, default=0)
    f.set_defaults(func=cmd_fixture)
    return p


def main(argv=None):
    logging.basicConfig(level=os.environ.get("SKINKIT_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SkinkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
