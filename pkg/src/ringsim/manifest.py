"""Run manifests: validation, preset resolution and content hashing."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["ManifestError", "RunManifest", "EXPERIMENTS", "DEFAULTS", "load_manifest"]

EXPERIMENTS = ("spin-map", "circuit-spectrum", "potential-map", "spectroscopy", "dephasing", "disorder")
PRESETS = ("desk", "full")
TOP_KEYS = {"experiment", "params", "seed", "output_dir", "preset"}

_CIRCUIT = {}  # white-cross defaults live in CircuitParams; overrides go here
CIRCUIT_KEYS = {"E_Jr", "E_Cr", "E_Ja", "E_Ca", "E_Jl", "E_Cl", "Ng", "Phi_I", "Phi_O", "d"}

# Per-experiment parameter defaults; "full" entries override "desk" ones.
DEFAULTS = {
    "spin-map": {
        "desk": {"M": 6, "t": 1.0, "zeta": [-2.0, 2.0, 21], "lambda": [-2.0, 2.0, 21], "tol": 1e-8},
        "full": {},
    },
    "circuit-spectrum": {
        "desk": {"circuit": _CIRCUIT, "d": 6, "k": 3, "convergence": False, "tol": 1e-10},
        "full": {"d": 10, "convergence": True},
    },
    "potential-map": {
        "desk": {"circuit": _CIRCUIT, "x": [-3.14159265358979, 3.14159265358979, 41],
                 "y": [-3.14159265358979, 3.14159265358979, 41]},
        "full": {"x": [-3.14159265358979, 3.14159265358979, 201], "y": [-3.14159265358979, 3.14159265358979, 201]},
    },
    "spectroscopy": {
        "desk": {"circuit": _CIRCUIT, "d": 6, "dQ": [0.0, 0.0, 1], "dPhi": [-0.1, 0.1, 9], "n_transitions": 4,
                 "tol": 1e-10},
        "full": {"d": 10, "dPhi": [-0.1, 0.1, 41]},
    },
    "dephasing": {
        "desk": {"circuit": _CIRCUIT, "channels": ["charge", "flux"], "d_fit": 6, "n_trajectories": 400,
                 "cross_terms": True, "max_points": 4000, "n_boot": 200},
        "full": {"d_fit": 8},
    },
    "disorder": {
        "desk": {"circuit": {"d": 6}, "sigma_junction": 0.02, "sigma_loop": 0.0, "sigma_gate": 0.0,
                 "n_realizations": 20, "observables": ["omega01"], "d_fit": 6, "n_trajectories": 400,
                 "reuse_nominal_cross": True},
        "full": {"circuit": {"d": 10}, "d_fit": 8},
    },
}


class ManifestError(ValueError):
    """Invalid manifest; the message names the offending key."""


def _merge(base, override):
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class RunManifest:
    experiment: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str = "runs"
    preset: str = "desk"

    @classmethod
    def from_dict(cls, data, preset=None, seed=None, output_dir=None):
        if not isinstance(data, dict):
            raise ManifestError("manifest must be a mapping")
        unknown = set(data) - TOP_KEYS
        if unknown:
            raise ManifestError(f"unknown manifest key(s): {', '.join(sorted(unknown))}")
        if "experiment" not in data:
            raise ManifestError("missing key: experiment")
        exp = data["experiment"]
        if exp not in EXPERIMENTS:
            raise ManifestError(f"experiment: unknown value {exp!r}; expected one of {', '.join(EXPERIMENTS)}")
        preset = preset or data.get("preset", "desk")
        if preset not in PRESETS:
            raise ManifestError(f"preset: unknown value {preset!r}")
        params = data.get("params", {})
        if not isinstance(params, dict):
            raise ManifestError("params: must be a mapping")
        allowed = set(DEFAULTS[exp]["desk"])
        bad = set(params) - allowed
        if bad:
            raise ManifestError(f"params.{sorted(bad)[0]}: unknown key for experiment {exp!r}")
        circ = params.get("circuit", {})
        if not isinstance(circ, dict):
            raise ManifestError("params.circuit: must be a mapping")
        bad = set(circ) - CIRCUIT_KEYS
        if bad:
            raise ManifestError(f"params.circuit.{sorted(bad)[0]}: unknown circuit parameter")
        seed = data.get("seed", 0) if seed is None else seed
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ManifestError("seed: must be a non-negative integer")
        out = data.get("output_dir", "runs") if output_dir is None else str(output_dir)
        return cls(exp, dict(params), int(seed), str(out), preset)

    def resolved_params(self):
        d = DEFAULTS[self.experiment]
        return _merge(_merge(d["desk"], d[self.preset]), self.params)

    def resolved(self):
        """Fully explicit manifest; feeding it back to ``run`` reproduces this run."""
        return {
            "experiment": self.experiment,
            "preset": self.preset,
            "seed": self.seed,
            "params": self.resolved_params(),
        }

    def digest(self):
        text = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def run_dir(self):
        return Path(self.output_dir) / f"{self.experiment}-{self.digest()[:12]}"


def load_manifest(path, **overrides) -> RunManifest:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from None
    return RunManifest.from_dict(data, **overrides)
