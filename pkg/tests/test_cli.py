import json
import socket
import threading
import time

import numpy as np
import pytest

from conftest import FR3_Q, plane_scene, sphere_scene
from skinkit.cli import main
from skinkit.frustum import SENTINEL
from skinkit.geometry.mesh import load_mesh
from skinkit.kinematics import save_joint_state
from skinkit.placement import SensorManifest
from skinkit.telemetry import ToFFrame, read_frame_file, write_frame_file


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def inputs(tmp_path, monkeypatch, patch_manifest, chain):
    monkeypatch.chdir(tmp_path)
    patch_manifest.save("man.json")
    chain.save("chain.json")
    save_joint_state(FR3_Q, "q.json")
    sphere_scene(chain).save("scene.json")
    return tmp_path


SIM = ["simulate", "--manifest", "man.json", "--chain", "chain.json", "--joints", "q.json",
       "--scene", "scene.json"]
REC = ["reconstruct", "--manifest", "man.json", "--chain", "chain.json", "--joints", "q.json"]


def test_simulate_file_size_and_determinism(inputs):
    assert run(*SIM, "--frames", 10, "--out", "a.bin") == 0
    assert run(*SIM, "--frames", 10, "--out", "b.bin") == 0
    a, b = (inputs / "a.bin").read_bytes(), (inputs / "b.bin").read_bytes()
    assert len(a) == 8 * 10 * 144 == 11520
    assert a == b
    meta = json.loads((inputs / "a.bin.meta.json").read_text())
    assert meta["provenance"]["flags"]["seed"] == 0 and meta["frames"] == 80
    assert run(*SIM, "--frames", 10, "--seed", 1, "--out", "c.bin") == 0
    assert (inputs / "c.bin").read_bytes() != a


def test_noise_free_end_to_end(inputs, capsys):
    assert run(*SIM, "--frames", 2, "--sigma", 0, "--out", "f.bin") == 0
    assert run(*REC, "--frames", "f.bin", "--out", "c.ply") == 0
    assert run("eval", "--cloud", "c.ply", "--scene", "scene.json", "--out", "r.json") == 0
    rep = json.loads((inputs / "r.json").read_text())
    g = rep["global"]
    assert g["point_count"] == 2 * 8 * 64 and g["valid_fraction"] == 1.0
    assert g["max_error_m"] <= 0.0006
    assert set(rep["per_sensor"]) == {str(i) for i in range(8)}
    assert rep["provenance"]["command"] == "eval"
    header = (inputs / "c.ply").read_bytes().split(b"end_header")[0]
    assert b"comment skinkit" in header and b"comment zones 0:128" in header


def test_reconstruct_all_sentinel_writes_empty_cloud(inputs, caplog):
    write_frame_file([ToFFrame(0, 0, 0, (SENTINEL,) * 64)], "s.bin")
    assert run(*REC, "--frames", "s.bin", "--out", "e.ply") == 0
    assert b"element vertex 0" in (inputs / "e.ply").read_bytes()
    assert "no valid zones" in caplog.text
    assert run("eval", "--cloud", "e.ply", "--scene", "scene.json") == 0


def test_binary_ply_scores_the_same(inputs, capsys):
    run(*SIM, "--frames", 1, "--sigma", 0, "--out", "f.bin")
    run(*REC, "--frames", "f.bin", "--out", "a.ply")
    run(*REC, "--frames", "f.bin", "--out", "b.ply", "--binary")
    capsys.readouterr()
    run("eval", "--cloud", "a.ply", "--scene", "scene.json", "--out", "a.json")
    run("eval", "--cloud", "b.ply", "--scene", "scene.json", "--out", "b.json")
    ga = json.loads((inputs / "a.json").read_text())["global"]
    gb = json.loads((inputs / "b.json").read_text())["global"]
    assert ga == gb


def _free_port():
    s = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


def test_udp_path_matches_file_path(inputs):
    port = _free_port()
    codes = {}
    th = threading.Thread(target=lambda: codes.setdefault("collect", run(
        "collect", "--listen", f"127.0.0.1:{port}", "--frames", 80, "--duration", 20,
        "--out", "udp.bin", "--stats", "stats.json")))
    th.start()
    time.sleep(0.3)
    assert run(*SIM, "--frames", 10, "--udp", f"127.0.0.1:{port}") == 0
    th.join(30)
    assert codes["collect"] == 0
    run(*SIM, "--frames", 10, "--out", "file.bin")
    udp = read_frame_file("udp.bin")
    assert sorted(udp, key=lambda f: (f.sequence, f.sensor_index)) == read_frame_file("file.bin")
    stats = json.loads((inputs / "stats.json").read_text())
    assert stats["total_frames"] == 80 and stats["total_gaps"] == 0


def test_generate_small_patch(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert run("fixture", "rectangle", "--out", "rect.obj") == 0
    assert run("generate", "--mesh", "rect.obj", "--out-mesh", "skin.stl",
               "--out-manifest", "man.json", "--seed", 3) == 0
    out = capsys.readouterr().out
    man = SensorManifest.load("man.json")
    assert len(man.sensors) >= 8 and f"sensors placed: {len(man.sensors)}" in out
    assert man.link_name == "link5"
    assert man.skin_params["thickness_m"] == 0.005
    assert man.provenance["flags"]["seed"] == 3
    # every mount sits on the outer sheet, 5 mm above the patch
    assert all(s.origin[2] == pytest.approx(0.005) for s in man.sensors)
    meta = json.loads((tmp_path / "skin.stl.meta.json").read_text())
    assert meta["watertight"] is True
    assert 0 < meta["volume_m3"] < 0.28 * 0.104 * 0.005


def test_generate_huge_separation_gives_one_sensor(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    run("fixture", "box", "--out", "box.stl")
    assert run("generate", "--mesh", "box.stl", "--min-sep", 10.0, "--voxel", 0.004,
               "--out-mesh", "s.stl", "--out-manifest", "m.json") == 0
    assert len(SensorManifest.load("m.json").sensors) == 1


def test_generate_is_byte_identical_across_runs(tmp_path, monkeypatch):
    outs = []
    for d in ("a", "b"):
        (tmp_path / d).mkdir()
        monkeypatch.chdir(tmp_path / d)
        run("fixture", "half-cylinder", "--out", "h.obj")
        assert run("generate", "--mesh", "h.obj", "--out-mesh", "s.stl", "--out-manifest", "m.json",
                   "--seed", 5, "--voxel", 0.002) == 0
        outs.append(((tmp_path / d / "m.json").read_bytes(), (tmp_path / d / "s.stl").read_bytes()))
    assert outs[0] == outs[1]


def test_generate_region_options(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    run("fixture", "sphere", "--out", "s.obj")
    cap = np.flatnonzero(load_mesh("s.obj").face_normals[:, 0] > 0.8)
    (tmp_path / "faces.json").write_text(json.dumps(cap.tolist()))
    assert run("generate", "--mesh", "s.obj", "--region", "normal:0,0,1,50", "--voxel", 0.004,
               "--out-mesh", "a.stl", "--out-manifest", "a.json") == 0
    man = SensorManifest.load("a.json")
    assert all(s.rotation[8] > 0.6 for s in man.sensors)
    assert run("generate", "--mesh", "s.obj", "--region", "faces.json", "--min-sep", 0.02,
               "--voxel", 0.004, "--out-mesh", "b.stl", "--out-manifest", "b.json") == 0
    assert run("generate", "--mesh", "s.obj", "--region", "bogus:1", "--out-mesh", "c.stl",
               "--out-manifest", "c.json") == 4


def test_exit_codes(tmp_path, monkeypatch, inputs):
    # missing mesh: IO error and nothing written
    assert run("generate", "--mesh", "nope.obj", "--out-mesh", "x.stl", "--out-manifest", "x.json") == 3
    assert not (inputs / "x.stl").exists() and not (inputs / "x.json").exists()
    # degenerate mesh: empty after cleaning
    (inputs / "flat.obj").write_text("v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n")
    assert run("generate", "--mesh", "flat.obj", "--out-mesh", "x.stl", "--out-manifest", "x.json") == 4
    # voxel budget exceeded: geometry class
    run("fixture", "box", "--out", "box.stl")
    assert run("generate", "--mesh", "box.stl", "--voxel", 1e-4, "--out-mesh", "x.stl",
               "--out-manifest", "x.json") == 5
    assert not (inputs / "x.stl").exists()
    # bad parameters: usage
    assert run("generate", "--mesh", "box.stl", "--min-sep", -1, "--out-mesh", "x.stl",
               "--out-manifest", "x.json") == 2
    assert run(*SIM, "--frames", 1) == 2
    # kinematics mismatch
    save_joint_state([0.0] * 3, "q3.json")
    assert run(*SIM[:5], "--joints", "q3.json", "--scene", "scene.json", "--out", "f.bin") == 7
    # unresolvable destination
    assert run(*SIM, "--frames", 1, "--udp", "host.invalid:9") == 8
    # malformed inputs
    (inputs / "junk.bin").write_bytes(b"\x00" * 100)
    assert run(*REC, "--frames", "junk.bin", "--out", "c.ply") == 4
    (inputs / "junk.json").write_text("{")
    assert run("simulate", "--manifest", "junk.json", "--chain", "chain.json", "--joints", "q.json",
               "--scene", "scene.json", "--out", "f.bin") == 4
    assert run("eval", "--cloud", "junk.bin", "--scene", "scene.json") == 4


def test_argparse_usage_errors():
    with pytest.raises(SystemExit) as e:
        main(["generate"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0


def test_plane_scene_through_cli(inputs, chain):
    plane_scene(chain, 0.35).save("plane.json")
    run(*SIM[:-1], "plane.json", "--frames", 1, "--sigma", 0, "--out", "p.bin")
    run(*REC, "--frames", "p.bin", "--out", "p.ply")
    assert run("eval", "--cloud", "p.ply", "--scene", "plane.json", "--out", "p.json") == 0
    g = json.loads((inputs / "p.json").read_text())["global"]
    assert g["point_count"] == 512 and g["max_error_m"] <= 0.0006


def test_generate_max_sensors_keeps_sampling_prefix(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    run("fixture", "rectangle", "--out", "rect.obj")
    base = ["generate", "--mesh", "rect.obj", "--seed", 2, "--voxel", 0.002]
    assert run(*base, "--out-mesh", "a.stl", "--out-manifest", "a.json") == 0
    assert run(*base, "--max-sensors", 3, "--out-mesh", "b.stl", "--out-manifest", "b.json") == 0
    full, cut = SensorManifest.load("a.json").sensors, SensorManifest.load("b.json").sensors
    assert len(full) > 3 and len(cut) == 3
    assert [s.origin for s in cut] == [s.origin for s in full[:3]]
    assert run(*base, "--max-sensors", 0, "--out-mesh", "c.stl", "--out-manifest", "c.json") == 2
