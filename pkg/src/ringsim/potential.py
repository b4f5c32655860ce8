"""Classical Josephson potential of the ring over the six node phases.

Phases are in radians (node flux divided by the reduced flux quantum) and
energies in GHz.  Junction orientation follows the circuit model: azimuthal
junction m runs from node m to m+1, outer junction m from node 2m to 2m+3.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import constants

from .circuit import N_NODES, OUTER_NODES, CircuitParams, compose_flux_offsets

__all__ = [
    "PotentialParams",
    "potential",
    "gradient",
    "embed",
    "hessian",
    "plane_potential",
    "find_minimum",
    "MinimumResult",
    "junction_currents",
    "critical_current_nA",
    "node_current_balance",
    "clockwise_minimum",
    "anticlockwise_minimum",
    "refine_cut_minimum",
    "raster",
]

_AZ_FROM = np.arange(N_NODES)
_AZ_TO = (np.arange(N_NODES) + 1) % N_NODES
_L_FROM = np.array([a for a, _ in OUTER_NODES])
_L_TO = np.array([b for _, b in OUTER_NODES])


@dataclass(frozen=True)
class PotentialParams:
    E_Jr: tuple
    E_Ja: tuple
    E_Jl: tuple
    phase_a: tuple  # radians, one per azimuthal junction
    phase_l: tuple  # radians, one per outer junction

    def __post_init__(self):
        for name, n in (("E_Jr", 6), ("E_Ja", 6), ("E_Jl", 3), ("phase_a", 6), ("phase_l", 3)):
            v = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (n,))
            object.__setattr__(self, name, tuple(float(x) for x in v))
        if min(self.E_Jr + self.E_Ja + self.E_Jl) <= 0:
            raise ValueError("Josephson energies must be positive")

    @classmethod
    def from_circuit(cls, p: CircuitParams):
        f = compose_flux_offsets(p.Phi_I, p.Phi_O)
        return cls(
            p.E_Jr, p.E_Ja, p.E_Jl,
            tuple(2 * np.pi * x for x in f.Phi_a),
            tuple(2 * np.pi * x for x in f.Phi_l),
        )

    def arrays(self):
        return (np.asarray(self.E_Jr), np.asarray(self.E_Ja), np.asarray(self.E_Jl),
                np.asarray(self.phase_a), np.asarray(self.phase_l))


def _drops(p, phi):
    _, _, _, pa, pl = p.arrays()
    az = phi[..., _AZ_TO] - phi[..., _AZ_FROM] - pa
    lo = phi[..., _L_TO] - phi[..., _L_FROM] - pl
    return az, lo


def potential(p: PotentialParams, phi):
    """V(phi) in GHz; broadcasts over leading axes of ``phi`` (last axis = 6 nodes)."""
    phi = np.asarray(phi, dtype=float)
    Jr, Ja, Jl, _, _ = p.arrays()
    az, lo = _drops(p, phi)
    return -(Ja * np.cos(az)).sum(-1) - (Jl * np.cos(lo)).sum(-1) - (Jr * np.cos(phi)).sum(-1)


def gradient(p: PotentialParams, phi):
    phi = np.asarray(phi, dtype=float)
    Jr, Ja, Jl, _, _ = p.arrays()
    az, lo = _drops(p, phi)
    g = Jr * np.sin(phi)
    sa = Ja * np.sin(az)
    sl = Jl * np.sin(lo)
    # d/dphi_to of -E cos(phi_to - phi_from - f) = E sin(.)
    np.add.at(g, _AZ_TO, sa)
    np.subtract.at(g, _AZ_FROM, sa)
    np.add.at(g, _L_TO, sl)
    np.subtract.at(g, _L_FROM, sl)
    return g


def hessian(p: PotentialParams, phi):
    phi = np.asarray(phi, dtype=float)
    Jr, Ja, Jl, _, _ = p.arrays()
    az, lo = _drops(p, phi)
    h = np.diag(Jr * np.cos(phi))
    for frm, to, c in zip(np.concatenate([_AZ_FROM, _L_FROM]), np.concatenate([_AZ_TO, _L_TO]),
                          np.concatenate([Ja * np.cos(az), Jl * np.cos(lo)])):
        h[to, to] += c
        h[frm, frm] += c
        h[to, frm] -= c
        h[frm, to] -= c
    return h


def embed(x, y):
    """Node phases phi_n = n x + y with n = 1..6."""
    n = np.arange(1, N_NODES + 1)
    x = np.asarray(x, dtype=float)[..., None]
    y = np.asarray(y, dtype=float)[..., None]
    return n * x + y


def plane_potential(p, x, y):
    return potential(p, embed(x, y))


def clockwise_minimum():
    return embed(-2 * np.pi / 3, 0.0)


def anticlockwise_minimum():
    return embed(2 * np.pi / 3, 0.0)


@dataclass
class MinimumResult:
    phi: np.ndarray
    energy: float
    grad_norm: float
    iterations: int


def find_minimum(p: PotentialParams, start, gtol=1e-9, max_iter=2000):
    """Backtracking descent until ||grad|| < gtol.

    Directions are curvature-scaled gradients: the gradient is expanded in
    Hessian eigenvectors and each component divided by |curvature| (floored),
    which is a Newton step near a minimum and still a descent direction at a
    saddle.  Plain gradient steps crawl here because the outer junctions make
    the landscape stiff while the valleys are exactly flat.
    """
    phi = np.array(start, dtype=float)
    v = float(potential(p, phi))
    g = gradient(p, phi)
    for it in range(max_iter):
        gn = float(np.linalg.norm(g))
        if gn < gtol:
            return MinimumResult(phi, v, gn, it)
        w, u = np.linalg.eigh(hessian(p, phi))
        floor = 1e-3 * max(abs(w[-1]), 1e-12)
        direction = -(u @ ((u.T @ g) / np.maximum(np.abs(w), floor)))
        slope = float(direction @ g)
        t = 1.0
        while t > 1e-12:
            trial = phi + t * direction
            vt = float(potential(p, trial))
            if vt <= v + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            # round-off floor of V reached; take the full step on the gradient alone
            trial = phi + direction
            vt = float(potential(p, trial))
        phi, v = trial, vt
        g = gradient(p, phi)
    raise RuntimeError(f"minimization did not reach |grad| < {gtol} in {max_iter} iterations")


def refine_cut_minimum(p: PotentialParams, x0, y=0.0, xtol=1e-12):
    """Local minimum of the cut V(x, y) near ``x0`` by bounded scalar search."""
    from scipy.optimize import minimize_scalar

    r = minimize_scalar(
        lambda x: float(plane_potential(p, x, y)),
        bounds=(x0 - 0.5, x0 + 0.5),
        method="bounded",
        options={"xatol": xtol},
    )
    return float(r.x), float(r.fun)


def critical_current_nA(E_J_GHz):
    """I_c = 2 e E_J / hbar with E_J = h * E_J_GHz."""
    return 2 * constants.e * (constants.h * np.asarray(E_J_GHz) * 1e9) / constants.hbar * 1e9


def junction_currents(p: PotentialParams, phi):
    """Supercurrent through every junction, relative to its critical current and in nA.

    Each junction carries I_c sin(delta) with delta = phi_to - phi_from - offset;
    radial junctions run from ground to their node.
    """
    phi = np.asarray(phi, dtype=float)
    Jr, Ja, Jl, _, _ = p.arrays()
    az, lo = _drops(p, phi)
    rel = {"radial": np.sin(phi), "azimuthal": np.sin(az), "outer": np.sin(lo)}
    absolute = {
        "radial": rel["radial"] * critical_current_nA(Jr),
        "azimuthal": rel["azimuthal"] * critical_current_nA(Ja),
        "outer": rel["outer"] * critical_current_nA(Jl),
    }
    return rel, absolute


def node_current_balance(p: PotentialParams, phi):
    """Signed current sum (nA) at every node; proportional to the gradient of V."""
    _, cur = junction_currents(p, phi)
    net = np.array(cur["radial"], dtype=float)
    np.subtract.at(net, _AZ_FROM, cur["azimuthal"])
    np.add.at(net, _AZ_TO, cur["azimuthal"])
    np.subtract.at(net, _L_FROM, cur["outer"])
    np.add.at(net, _L_TO, cur["outer"])
    return net


def raster(p: PotentialParams, xs, ys):
    """Rows {x, y, V} over the Cartesian grid (x varies slowest)."""
    X, Y = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), indexing="ij")
    V = plane_potential(p, X, Y)
    return [{"x": float(a), "y": float(b), "V": float(c)} for a, b, c in zip(X.ravel(), Y.ravel(), V.ravel())]
