"""Command-line batch runner.

    ringsim run <manifest.json> [--preset desk|full] [--seed S] [--out DIR]
    ringsim render <table.csv> --x COL --y COL --z COL -o <out.svg> [--log]

Each run writes into ``<out>/<experiment>-<hash>/``: the CSV tables, a JSON
dump of auxiliary results, and ``manifest.resolved.json``, which re-runs
the same experiment when passed back to ``ringsim run``.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from . import circuit as cm
from . import dephasing as dp
from . import disorder as dis
from . import potential as pot
from . import spin_chain as sc
from .heatmap import render_heatmap
from .manifest import ManifestError, RunManifest, load_manifest
from .tables import atomic_write_text, write_table

__all__ = ["main", "run_manifest", "worker_count"]

log = logging.getLogger("ringsim")


def worker_count():
    """Worker cap from RINGSIM_THREADS (default: CPU count)."""
    cpus = os.cpu_count() or 1
    raw = os.environ.get("RINGSIM_THREADS")
    if not raw:
        return cpus
    try:
        n = int(raw)
    except ValueError:
        raise ManifestError(f"RINGSIM_THREADS must be an integer, got {raw!r}") from None
    return max(1, min(n, cpus))


def _pmap(fn, items):
    items = list(items)
    n = worker_count()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _grid(spec):
    lo, hi, n = spec
    return np.linspace(float(lo), float(hi), int(n))


def _circuit(params):
    try:
        return cm.CircuitParams.from_dict(params.get("circuit", {}))
    except (cm.ParameterError, TypeError) as exc:
        raise ManifestError(f"params.circuit: {exc}") from None


# experiment runners: each returns {file name: (rows, columns)} plus an extras dict


def _spin_map(m: RunManifest, P):
    p0 = sc.SpinChainParams(M=int(P["M"]), t=float(P["t"]))
    zs, ls = _grid(P["zeta"]), _grid(P["lambda"])
    chunks = _pmap(lambda z: sc.sweep_protection_map(p0, [z], ls, tol=P["tol"]), zs)
    rows = [r for c in chunks for r in c]
    for r in rows:
        r["protected"] = bool(r["flag_T"] and r["flag_I"] and r["flag_N"])
    cols = list(sc.SWEEP_COLUMNS) + ["protected"]
    return {"spin_map.csv": (rows, cols)}, {}


def _circuit_spectrum(m, P):
    p = _circuit(P).with_(d=int(P["d"]))
    s = cm.spectrum(p, k=int(P["k"]), tol=P["tol"], seed=m.seed, convergence=bool(P["convergence"]))
    row = {"d": p.d, "omega01_GHz": s.omega01, "omega12_GHz": s.omega12, "alpha": s.alpha,
           "convergence_delta_GHz": s.convergence_delta, "max_residual": float(np.max(s.residuals))}
    for j, e in enumerate(s.eigenvalues):
        row[f"E{j}_GHz"] = float(e)
    prot = cm.protection_matrix_elements(p, spec=s)
    return {
        "spectrum.csv": ([row], list(row)),
        "protection.csv": (prot, ["m", "N10", "cos10", "sin10", "dN"]),
    }, {"circuit": p.to_dict()}


def _potential_map(m, P):
    p = _circuit(P)
    pp = pot.PotentialParams.from_circuit(p)
    rows = pot.raster(pp, _grid(P["x"]), _grid(P["y"]))
    minima = []
    for label, start in (("clockwise", pot.clockwise_minimum()), ("anticlockwise", pot.anticlockwise_minimum())):
        res = pot.find_minimum(pp, start)
        rel, cur = pot.junction_currents(pp, res.phi)
        x_cut, v_cut = pot.refine_cut_minimum(pp, float(np.mean(np.diff(start))))
        minima.append({
            "label": label,
            "V": res.energy,
            "grad_norm": res.grad_norm,
            "x_cut": x_cut,
            "V_cut": v_cut,
            "max_outer_rel": float(np.max(np.abs(rel["outer"]))),
            "azimuthal_rel_mean": float(np.mean(np.abs(rel["azimuthal"]))),
            "azimuthal_nA_mean": float(np.mean(np.abs(cur["azimuthal"]))),
        })
    return {"potential.csv": (rows, ["x", "y", "V"]), "minima.csv": (minima, list(minima[0]))}, {}


def _spectroscopy(m, P):
    p = _circuit(P).with_(d=int(P["d"]))
    pts = [(q, f) for q in _grid(P["dQ"]) for f in _grid(P["dPhi"])]
    n = int(P["n_transitions"])
    chunks = _pmap(lambda qf: cm.spectroscopy_sweep(p, [qf[0]], [qf[1]], n_transitions=n, tol=P["tol"],
                                                    seed=m.seed), pts)
    rows = [r for c in chunks for r in c]
    cols = ["dQ_tot", "dPhi_tot", "ok"] + [f"omega0{j}" for j in range(1, n + 1)]
    return {"spectroscopy.csv": (rows, cols)}, {}


def _channel_sets(names):
    out = {}
    for name in names:
        if name == "charge":
            out["charge"] = dp.charge_channels()
        elif name == "flux":
            out["flux"] = dp.flux_channels()
        else:
            raise ManifestError(f"params.channels: unknown channel set {name!r}")
    return out


def _dephasing(m, P):
    p = _circuit(P)
    preset = dp.PRESETS[m.preset]
    files, extras, summary = {}, {"response_surfaces": {}}, []
    for name, chans in _channel_sets(P["channels"]).items():
        rs = dp.fit_response_surface(p, list(chans), d_fit=int(P["d_fit"]), cross_terms=bool(P["cross_terms"]),
                                     seed=m.seed)
        curve, T = dp.simulate_dephasing(rs, chans, preset, n_trajectories=int(P["n_trajectories"]), seed=m.seed,
                                         max_points=int(P["max_points"]), n_boot=int(P["n_boot"]))
        rows = [{"t_s": t, "re_f": f.real, "im_f": f.imag, "abs_f": abs(f), "err": e}
                for t, f, e in zip(curve.t, curve.f, curve.err)]
        files[f"coherence_{name}.csv"] = (rows, ["t_s", "re_f", "im_f", "abs_f", "err"])
        extras["response_surfaces"][name] = rs.to_dict()
        summary.append({"channels": name, "T_phi_s": T.T_phi, "lower_bound": T.lower_bound,
                        "n_trajectories": curve.n, "omega_ref_GHz": rs.omega_ref,
                        "max_abs_D_x": float(np.max(np.abs(rs.D_x))), "d_fit": rs.d_fit})
    files["dephasing_summary.csv"] = (summary, list(summary[0]))
    return files, extras


def _disorder(m, P):
    p = _circuit(P)
    spec = dis.DisorderSpec(P["sigma_junction"], P["sigma_loop"], P["sigma_gate"], int(P["n_realizations"]),
                            base_seed=m.seed)
    res = dis.ensemble_run(p, spec, observables=tuple(P["observables"]), preset=m.preset,
                           n_trajectories=int(P["n_trajectories"]), d_fit=int(P["d_fit"]), noise_seed=m.seed,
                           reuse_nominal_cross=bool(P["reuse_nominal_cross"]))
    rows = [r.row() for r in res.records]
    summ, hist = [], []
    for name, o in res.observables.items():
        summ.append({"observable": name, "mean": o.mean, "std": o.std, "count": o.count,
                     "failed": res.n_failed})
        for k, c in enumerate(o.counts):
            hist.append({"observable": name, "bin": k, "lo": float(o.edges[k]), "hi": float(o.edges[k + 1]),
                         "count": int(c)})
    return {
        "realizations.csv": (rows, list(rows[0])),
        "summary.csv": (summ, ["observable", "mean", "std", "count", "failed"]),
        "histograms.csv": (hist, ["observable", "bin", "lo", "hi", "count"]),
    }, {}


RUNNERS = {
    "spin-map": _spin_map,
    "circuit-spectrum": _circuit_spectrum,
    "potential-map": _potential_map,
    "spectroscopy": _spectroscopy,
    "dephasing": _dephasing,
    "disorder": _disorder,
}


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def run_manifest(m: RunManifest):
    """Execute a validated manifest; returns the run directory."""
    P = m.resolved_params()
    out = m.run_dir()
    out.mkdir(parents=True, exist_ok=True)
    resolved = m.resolved()
    atomic_write_text(out / "manifest.resolved.json", json.dumps(resolved, indent=2, sort_keys=True) + "\n")
    meta = {
        "experiment": m.experiment,
        "preset": m.preset,
        "seed": str(m.seed),
        "manifest_sha256": m.digest(),
        "ringsim_version": __version__,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    try:
        files, extras = RUNNERS[m.experiment](m, P)
    except ManifestError:
        raise
    except Exception as exc:
        raise RuntimeError(f"{m.experiment}: {type(exc).__name__}: {exc}") from exc
    for name, (rows, cols) in files.items():
        write_table(out / name, rows, cols, metadata=meta)
    if extras:
        atomic_write_text(out / "extras.json", json.dumps(extras, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return out


def _parser():
    ap = argparse.ArgumentParser(prog="ringsim", description="Protected-qubit ring simulations.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment manifest")
    r.add_argument("manifest")
    r.add_argument("--preset", choices=["desk", "full"])
    r.add_argument("--seed", type=int)
    r.add_argument("--out", help="output root directory")
    h = sub.add_parser("render", help="render a CSV grid as an SVG heatmap")
    h.add_argument("csv")
    h.add_argument("--x", required=True)
    h.add_argument("--y", required=True)
    h.add_argument("--z", required=True)
    h.add_argument("-o", "--output", required=True)
    h.add_argument("--log", action="store_true", help="logarithmic color scale")
    h.add_argument("--palette", default="viridis")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            m = load_manifest(args.manifest, preset=args.preset, seed=args.seed, output_dir=args.out)
            out = run_manifest(m)
            print(out)
        else:
            print(render_heatmap(args.csv, args.x, args.y, args.z, args.output, palette=args.palette, log=args.log))
    except ManifestError as exc:
        print(f"ringsim: invalid manifest: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, KeyError, ValueError) as exc:
        print(f"ringsim: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"ringsim: run failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
