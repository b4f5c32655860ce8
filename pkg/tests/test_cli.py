import json

import pytest

from ringsim import cli
from ringsim.manifest import ManifestError, RunManifest
from ringsim.tables import read_table, split_metadata

SMALL = {
    "spin-map": {"M": 4, "zeta": [-1, 1, 3], "lambda": [-1, 1, 3]},
    "circuit-spectrum": {"d": 3},
    "potential-map": {"x": [-3, 3, 5], "y": [-3, 3, 4]},
    "spectroscopy": {"d": 3, "dPhi": [0.0, 0.1, 2], "n_transitions": 2},
    "dephasing": {"circuit": {"d": 3}, "d_fit": 3, "channels": ["charge"], "n_trajectories": 4,
                  "cross_terms": False, "max_points": 50, "n_boot": 5},
    "disorder": {"circuit": {"d": 3}, "n_realizations": 3},
}


def write_manifest(tmp_path, data, name="m.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def bodies(run_dir):
    return {p.name: split_metadata(p.read_text())[1] for p in sorted(run_dir.glob("*.csv"))}


@pytest.mark.parametrize("bad, key", [
    ({"experiment": "spin-map", "colour": 1}, "colour"),
    ({"experiment": "teleport"}, "experiment"),
    ({"experiment": "spin-map", "params": {"zeta_max": 2}}, "zeta_max"),
    ({"experiment": "circuit-spectrum", "params": {"circuit": {"EJ": 2}}}, "EJ"),
    ({"experiment": "spin-map", "seed": -1}, "seed"),
])
def test_validation_names_offending_key(tmp_path, capsys, bad, key):
    status = cli.main(["run", str(write_manifest(tmp_path, bad)), "--out", str(tmp_path / "out")])
    assert status != 0
    assert key in capsys.readouterr().err


def test_preset_overrides_and_digest():
    a = RunManifest.from_dict({"experiment": "circuit-spectrum"})
    b = RunManifest.from_dict({"experiment": "circuit-spectrum"}, preset="full")
    assert a.resolved_params()["d"] == 6 and b.resolved_params()["d"] == 10
    assert a.digest() != b.digest()
    with pytest.raises(ManifestError):
        RunManifest.from_dict({"experiment": "spin-map", "preset": "huge"})


@pytest.mark.parametrize("experiment", sorted(SMALL))
def test_run_rerun_from_resolved_manifest_is_byte_identical(tmp_path, experiment):
    path = write_manifest(tmp_path, {"experiment": experiment, "params": SMALL[experiment], "seed": 3})
    assert cli.main(["run", str(path), "--out", str(tmp_path / "a")]) == 0
    (run_a,) = (tmp_path / "a").iterdir()
    assert run_a.name.startswith(experiment + "-")
    resolved = run_a / "manifest.resolved.json"
    assert cli.main(["run", str(resolved), "--out", str(tmp_path / "b")]) == 0
    (run_b,) = (tmp_path / "b").iterdir()
    assert run_a.name == run_b.name
    a, b = bodies(run_a), bodies(run_b)
    assert a and a == b
    for p in run_a.glob("*.csv"):
        meta = split_metadata(p.read_text())[0]
        assert meta["seed"] == "3" and meta["experiment"] == experiment


def test_seed_and_out_flags(tmp_path):
    path = write_manifest(tmp_path, {"experiment": "circuit-spectrum", "params": {"d": 3}})
    cli.main(["run", str(path), "--out", str(tmp_path / "o"), "--seed", "9"])
    (run,) = (tmp_path / "o").iterdir()
    assert json.loads((run / "manifest.resolved.json").read_text())["seed"] == 9


def test_distinct_manifests_do_not_collide(tmp_path):
    for d in (2, 3):
        path = write_manifest(tmp_path, {"experiment": "circuit-spectrum", "params": {"d": d}}, f"m{d}.json")
        cli.main(["run", str(path), "--out", str(tmp_path / "o")])
    assert len(list((tmp_path / "o").iterdir())) == 2


def test_spin_map_protected_rows(tmp_path):
    path = write_manifest(tmp_path, {"experiment": "spin-map", "params": {"zeta": [0, 2, 5], "lambda": [-2, 0, 5]}})
    cli.main(["run", str(path), "--out", str(tmp_path / "o")])
    (run,) = (tmp_path / "o").iterdir()
    rows, _ = read_table(run / "spin_map.csv")
    prot = [r for r in rows if r["protected"] == "1"]
    assert prot
    assert all(float(r["R"]) < 1e-10 and float(r["D"]) < 1e-10 for r in prot)


def test_render_subcommand(tmp_path):
    path = write_manifest(tmp_path, {"experiment": "potential-map", "params": SMALL["potential-map"]})
    cli.main(["run", str(path), "--out", str(tmp_path / "o")])
    (run,) = (tmp_path / "o").iterdir()
    svg = tmp_path / "p.svg"
    assert cli.main(["render", str(run / "potential.csv"), "--x", "x", "--y", "y", "--z", "V", "-o", str(svg)]) == 0
    assert svg.read_text().count("<rect") == 20


def test_render_ragged_grid_fails(tmp_path, capsys):
    from ringsim.tables import write_table

    write_table(tmp_path / "r.csv", [{"x": 0, "y": 0, "z": 1}, {"x": 1, "y": 0, "z": 1}, {"x": 0, "y": 1, "z": 1}])
    status = cli.main(["render", str(tmp_path / "r.csv"), "--x", "x", "--y", "y", "--z", "z", "-o",
                       str(tmp_path / "r.svg")])
    assert status != 0


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("RINGSIM_THREADS", "1")
    assert cli.worker_count() == 1
    monkeypatch.setenv("RINGSIM_THREADS", "lots")
    with pytest.raises(ManifestError):
        cli.worker_count()


def test_no_temp_files_left(tmp_path):
    path = write_manifest(tmp_path, {"experiment": "circuit-spectrum", "params": {"d": 2}})
    cli.main(["run", str(path), "--out", str(tmp_path / "o")])
    (run,) = (tmp_path / "o").iterdir()
    assert not [p for p in run.iterdir() if p.name.endswith(".tmp")]


def test_shipped_manifests_validate():
    from pathlib import Path

    from ringsim.manifest import load_manifest

    paths = sorted((Path(__file__).parent.parent / "manifests").glob("*.json"))
    assert paths
    for p in paths:
        load_manifest(p)
