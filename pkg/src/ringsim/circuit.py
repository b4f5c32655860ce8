"""Charge-basis model of the six-node Josephson ring.

Energies are linear frequencies E/h in GHz.  Node and junction indices are
0-based in code; docstrings use the 1-based labels of the circuit diagram.

Index map
---------
* radial junction m: node m to ground.
* azimuthal junction m: nodes m and m+1; it closes inner sector m, so its
  flux offset is ``Phi_I[m]``.
* outer junction m (1..3): nodes 2m and 2m+3.  Its loop runs back along the
  azimuthal path 2m -> 2m+1 -> 2m+2 -> 2m+3 and therefore encloses inner
  sectors 2m, 2m+1, 2m+2 plus outer area m::

      Phi_l[m] = Phi_I[2m] + Phi_I[2m+1] + Phi_I[2m+2] + Phi_O[m]   (mod 6)
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import sparse_spectra as ss

__all__ = [
    "CircuitParams",
    "WHITE_CROSS",
    "FluxOffsets",
    "CircuitHamiltonian",
    "SpectrumResult",
    "CapacityError",
    "ParameterError",
    "OUTER_NODES",
    "OUTER_SECTORS",
    "build_inverse_capacitance",
    "compose_flux_offsets",
    "charge_window",
    "assemble_hamiltonian",
    "spectrum",
    "protection_matrix_elements",
    "protected",
    "operating_point_offsets",
    "spectroscopy_sweep",
    "design_params",
    "design_map",
    "PLASMA_GHZ",
]

log = logging.getLogger(__name__)

N_NODES = 6
N_OUTER = 3
PLASMA_GHZ = 10.0
MAX_DIM = 2_000_000

# outer junction m joins nodes 2m, 2m+3 (1-based) -> 0-based pairs
OUTER_NODES = tuple(((2 * m - 1) % N_NODES, (2 * m + 2) % N_NODES) for m in range(1, N_OUTER + 1))
OUTER_SECTORS = tuple(tuple((2 * m - 1 + j) % N_NODES for j in range(3)) for m in range(1, N_OUTER + 1))


class ParameterError(ValueError):
    pass


class CapacityError(ValueError):
    pass


def _vec(value, n, name):
    arr = np.broadcast_to(np.asarray(value, dtype=float), (n,)) if np.ndim(value) == 0 else np.asarray(value, float)
    if arr.shape != (n,):
        raise ParameterError(f"{name} must be a scalar or have length {n}, got shape {arr.shape}")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class CircuitParams:
    """Circuit energies (GHz), gate charges (Cooper pairs) and fluxes (Phi0).

    Junction energies may be scalars (uniform ring) or per-junction sequences
    of length 6 (radial, azimuthal) or 3 (outer); they are normalized to tuples.
    """

    E_Jr: tuple = 1.7
    E_Cr: tuple = 7.4
    E_Ja: tuple = 6.0
    E_Ca: tuple = 2.1
    E_Jl: tuple = 30.0
    E_Cl: tuple = 0.56
    Ng: tuple = 0.5
    Phi_I: tuple = 0.5
    Phi_O: tuple = 1.5
    d: int = 10

    def __post_init__(self):
        for name, n in (("E_Jr", 6), ("E_Cr", 6), ("E_Ja", 6), ("E_Ca", 6), ("E_Jl", 3), ("E_Cl", 3),
                        ("Ng", 6), ("Phi_I", 6), ("Phi_O", 3)):
            object.__setattr__(self, name, _vec(getattr(self, name), n, name))
        object.__setattr__(self, "d", int(self.d))
        if self.d < 2:
            raise ParameterError(f"d must be >= 2, got {self.d}")
        for name in ("E_Jr", "E_Cr", "E_Ja", "E_Ca", "E_Jl", "E_Cl"):
            if min(getattr(self, name)) <= 0:
                raise ParameterError(f"{name} must be positive")
        if not all(map(math.isfinite, self.Ng + self.Phi_I + self.Phi_O)):
            raise ParameterError("gate charges and fluxes must be finite")

    @property
    def dim(self):
        return self.d**N_NODES

    def with_(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, tuple) and len(set(v)) == 1:
                v = v[0]
            elif isinstance(v, tuple):
                v = list(v)
            out[k] = v
        return out

    @classmethod
    def from_dict(cls, data):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown circuit parameter(s): {', '.join(sorted(unknown))}")
        return cls(**data)


WHITE_CROSS = CircuitParams()


@dataclass(frozen=True)
class FluxOffsets:
    Phi_a: tuple
    Phi_l: tuple

    @property
    def phase_a(self):
        return tuple(float(np.mod(2 * np.pi * f, 2 * np.pi)) for f in self.Phi_a)

    @property
    def phase_l(self):
        return tuple(float(np.mod(2 * np.pi * f, 2 * np.pi)) for f in self.Phi_l)


def compose_flux_offsets(Phi_I, Phi_O) -> FluxOffsets:
    Phi_I = np.asarray(_vec(Phi_I, 6, "Phi_I"))
    Phi_O = np.asarray(_vec(Phi_O, 3, "Phi_O"))
    Phi_l = tuple(float(Phi_I[list(sec)].sum() + Phi_O[m]) for m, sec in enumerate(OUTER_SECTORS))
    return FluxOffsets(tuple(float(v) for v in Phi_I), Phi_l)


def operating_point_offsets():
    return compose_flux_offsets(WHITE_CROSS.Phi_I, WHITE_CROSS.Phi_O)


def build_inverse_capacitance(p: CircuitParams) -> np.ndarray:
    """Kinetic coefficients Etilde (GHz) with H_kin = sum Etilde_mn (N_m - Ng_m)(N_n - Ng_n).

    Capacitances are taken as C = 1/E_C in units of e^2/2 (E_C = e^2/2C), so
    Etilde = 2 e^2 C^-1 = 4 K^-1 with K the capacitance matrix in those units.
    """
    Cr = 1.0 / np.asarray(p.E_Cr)
    Ca = 1.0 / np.asarray(p.E_Ca)
    Cl = 1.0 / np.asarray(p.E_Cl)
    K = np.diag(Cr)
    for m in range(N_NODES):
        a, b = m, (m + 1) % N_NODES
        K[a, a] += Ca[m]
        K[b, b] += Ca[m]
        K[a, b] -= Ca[m]
        K[b, a] -= Ca[m]
    for m, (a, b) in enumerate(OUTER_NODES):
        K[a, a] += Cl[m]
        K[b, b] += Cl[m]
        K[a, b] -= Cl[m]
        K[b, a] -= Cl[m]
    if np.linalg.cond(K) > 1e14:
        raise ParameterError("capacitance matrix is singular")
    E = 4.0 * np.linalg.inv(K)
    return 0.5 * (E + E.T)


def charge_window(Ng, d):
    """The d consecutive integer charges whose midpoint is closest to ``Ng``.

    For even d the window is symmetric about every half-integer gate charge
    in (k - 1/2, k + 1/2], so small excursions around Ng = 1/2 never move it.
    """
    lo = math.ceil(Ng - d / 2.0 - 1e-12)
    return np.arange(lo, lo + d)


@dataclass
class _Hop:
    # coefficient c of Sigma+_a Sigma-_b (b is None for a single-node hop); h.c. implied
    a: int
    b: int | None
    coeff: complex
    label: str


class CircuitHamiltonian:
    """Matrix-free Hermitian operator on the d^6 charge basis.

    Stores the diagonal charging energies and a list of hop terms.  Node 1 is
    the slowest-varying index of the flattened basis.  ``triplets`` and
    ``to_sparse_hermitian`` materialize explicit storage when needed.
    """

    def __init__(self, p: CircuitParams, max_dim=MAX_DIM):
        if p.dim > max_dim:
            raise CapacityError(f"dimension d^6 = {p.dim} exceeds the configured budget {max_dim}")
        self.params = p
        self.d = p.d
        self.dim = p.dim
        self.shape = (self.dim, self.dim)
        self.etilde = build_inverse_capacitance(p)
        self.windows = [charge_window(g, p.d) for g in p.Ng]
        self.flux = compose_flux_offsets(p.Phi_I, p.Phi_O)

        offsets = [self._node_array(w - g, m) for m, (w, g) in enumerate(zip(self.windows, p.Ng))]
        diag = np.zeros((p.d,) * N_NODES)
        for m in range(N_NODES):
            for n in range(N_NODES):
                diag = diag + self.etilde[m, n] * (offsets[m] * offsets[n])
        self.diag = diag.reshape(-1)

        hops = []
        for m in range(N_NODES):
            hops.append(_Hop(m, None, -0.5 * p.E_Jr[m], f"r{m + 1}"))
        for m in range(N_NODES):
            phase = 2 * np.pi * self.flux.Phi_a[m]
            hops.append(_Hop(m, (m + 1) % N_NODES, -0.5 * p.E_Ja[m] * np.exp(1j * phase), f"a{m + 1}"))
        for m, (a, b) in enumerate(OUTER_NODES):
            phase = 2 * np.pi * self.flux.Phi_l[m]
            hops.append(_Hop(a, b, -0.5 * p.E_Jl[m] * np.exp(1j * phase), f"l{m + 1}"))
        self.hops = hops
        real = all(abs(h.coeff.imag) <= 1e-14 * max(abs(h.coeff), 1.0) for h in hops)
        if real:
            for h in hops:
                h.coeff = complex(h.coeff.real)
        self.dtype = np.dtype(np.float64 if real else np.complex128)

    def _node_array(self, values, m):
        shape = [1] * N_NODES
        shape[m] = -1
        return np.asarray(values, dtype=float).reshape(shape)

    def charge_diagonal(self, m):
        """Eigenvalues of N_m on the flattened basis."""
        arr = np.broadcast_to(self._node_array(self.windows[m], m), (self.d,) * N_NODES)
        return arr.reshape(-1).astype(float)

    @staticmethod
    def _slices(a, b, d):
        # Sigma+_a Sigma-_b maps charge n -> n + e_a - e_b
        dst = [slice(None)] * N_NODES
        src = [slice(None)] * N_NODES
        dst[a], src[a] = slice(1, d), slice(0, d - 1)
        if b is not None:
            dst[b], src[b] = slice(0, d - 1), slice(1, d)
        return tuple(dst), tuple(src)

    def matvec(self, x):
        x = np.asarray(x)
        if x.shape[0] != self.dim:
            raise ValueError(f"vector length {x.shape[0]} does not match dim {self.dim}")
        dtype = np.result_type(self.dtype, x.dtype)
        d = self.d
        xt = x.reshape((d,) * N_NODES)
        y = (self.diag * x).astype(dtype, copy=False).reshape((d,) * N_NODES)
        for h in self.hops:
            dst, src = self._slices(h.a, h.b, d)
            c = h.coeff if dtype.kind == "c" else h.coeff.real
            y[dst] += c * xt[src]
            y[src] += np.conj(c) * xt[dst]
        return y.reshape(-1)

    def apply_shift(self, x, m, up=True):
        """Apply Sigma+_m (``up``) or Sigma-_m to a state vector."""
        d = self.d
        xt = np.asarray(x).reshape((d,) * N_NODES)
        y = np.zeros_like(xt)
        dst, src = self._slices(m, None, d)
        if up:
            y[dst] = xt[src]
        else:
            y[src] = xt[dst]
        return y.reshape(-1)

    def triplets(self):
        """Explicit (row, col, value) entries of the diagonal and one triangle of hops."""
        d = self.d
        idx = np.arange(self.dim).reshape((d,) * N_NODES)
        rows, cols, vals = [idx.reshape(-1)], [idx.reshape(-1)], [self.diag.astype(complex)]
        for h in self.hops:
            dst, src = self._slices(h.a, h.b, d)
            r = idx[dst].reshape(-1)
            rows.append(r)
            cols.append(idx[src].reshape(-1))
            vals.append(np.full(r.size, h.coeff, dtype=complex))
        return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)

    def to_sparse_hermitian(self):
        r, c, v = self.triplets()
        return ss.SparseHermitian(self.dim, r, c, v)

    def toarray(self):
        return self.to_sparse_hermitian().toarray()

    def hermiticity_residual(self, seed=0):
        """|<x, H y> - conj(<y, H x>)| for random unit vectors."""
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim)
        y = rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim)
        x /= np.linalg.norm(x)
        y /= np.linalg.norm(y)
        return abs(np.vdot(x, self.matvec(y)) - np.conj(np.vdot(y, self.matvec(x))))


def assemble_hamiltonian(p: CircuitParams, max_dim=MAX_DIM) -> CircuitHamiltonian:
    return CircuitHamiltonian(p, max_dim=max_dim)


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    d: int
    vectors: np.ndarray | None = field(default=None, repr=False)
    convergence_delta: float = float("nan")
    iterations: int = 0

    @property
    def omega01(self):
        return float(self.eigenvalues[1] - self.eigenvalues[0])

    @property
    def omega12(self):
        return float(self.eigenvalues[2] - self.eigenvalues[1]) if len(self.eigenvalues) > 2 else float("nan")

    @property
    def alpha(self):
        return self.omega12 / self.omega01

    def transitions(self, n):
        """omega_0j for j = 1..n."""
        ev = self.eigenvalues
        return [float(ev[j] - ev[0]) if j < len(ev) else float("nan") for j in range(1, n + 1)]


def spectrum(p: CircuitParams, k=3, tol=1e-10, seed=0, convergence=False, keep_vectors=True, v0=None,
             H=None, **solver_kw) -> SpectrumResult:
    """Lowest ``k`` levels (GHz) of the circuit at cutoff ``p.d``.

    With ``convergence=True`` the run is repeated at cutoff d-2 and
    ``convergence_delta`` holds |omega01(d) - omega01(d-2)|.
    """
    if k < 2:
        raise ParameterError("need at least two levels for a transition frequency")
    H = H if H is not None else assemble_hamiltonian(p)
    res = ss.lowest_k(H, k, tol=tol, seed=seed, v0=v0, **solver_kw)
    out = SpectrumResult(
        eigenvalues=res.values[:k],
        residuals=res.residuals[:k],
        d=p.d,
        vectors=res.vectors[:, :k] if keep_vectors else None,
        iterations=res.iterations,
    )
    if convergence and p.d > 3:
        lower = spectrum(p.with_(d=p.d - 2), k=k, tol=tol, seed=seed, keep_vectors=False, **solver_kw)
        out.convergence_delta = abs(out.omega01 - lower.omega01)
    return out


def protection_matrix_elements(p: CircuitParams, spec: SpectrumResult | None = None, H=None, **kw):
    """Per-node doublet matrix elements of N_m, cos(theta_m) and sin(theta_m).

    Rows hold moduli |<1|O|0>| and the diagonal difference <1|N_m|1> - <0|N_m|0>;
    both are independent of the eigenvector phases.
    """
    H = H if H is not None else assemble_hamiltonian(p)
    if spec is None or spec.vectors is None:
        spec = spectrum(p, k=3, H=H, **kw)
    v0, v1 = spec.vectors[:, 0], spec.vectors[:, 1]
    rows = []
    for m in range(N_NODES):
        n = H.charge_diagonal(m)
        up0, dn0 = H.apply_shift(v0, m, True), H.apply_shift(v0, m, False)
        cos10 = 0.5 * np.vdot(v1, up0 + dn0)
        sin10 = 0.5j * np.vdot(v1, dn0 - up0)
        rows.append(
            {
                "m": m + 1,
                "N10": float(abs(np.vdot(v1, n * v0))),
                "cos10": float(abs(cos10)),
                "sin10": float(abs(sin10)),
                "dN": float(np.vdot(v1, n * v1).real - np.vdot(v0, n * v0).real),
            }
        )
    return rows


def protected(rows, threshold=1e-6):
    return max(r["N10"] for r in rows) < threshold and max(abs(r["dN"]) for r in rows) < threshold


def _offset_params(p: CircuitParams, dQ_tot, dPhi_tot, base_Ng=0.5, base_total_inner=3.0):
    """Spread a total charge offset evenly over the gates and scale all loop fluxes uniformly."""
    scale = 1.0 + dPhi_tot / base_total_inner
    Ng = tuple(base_Ng + dQ_tot / N_NODES for _ in range(N_NODES))
    return p.with_(Ng=Ng, Phi_I=tuple(f * scale for f in p.Phi_I), Phi_O=tuple(f * scale for f in p.Phi_O))


def spectroscopy_sweep(p: CircuitParams, dQ_grid, dPhi_grid, n_transitions=4, tol=1e-10, seed=0):
    """First ``n_transitions`` transition frequencies over a (dQ_tot, dPhi_tot) grid.

    ``p`` should sit at the operating point; offsets are applied relative to it.
    """
    rows = []
    for dq in np.atleast_1d(np.asarray(dQ_grid, dtype=float)):
        for dphi in np.atleast_1d(np.asarray(dPhi_grid, dtype=float)):
            q = _offset_params(p, float(dq), float(dphi))
            row = {"dQ_tot": float(dq), "dPhi_tot": float(dphi)}
            try:
                s = spectrum(q, k=n_transitions + 1, tol=tol, seed=seed, keep_vectors=False)
                w = s.transitions(n_transitions)
                row["ok"] = True
            except ss.EigensolverError as exc:
                log.warning("spectroscopy point (%g, %g) failed: %s", dq, dphi, exc)
                w = [float("nan")] * n_transitions
                row["ok"] = False
            for j, val in enumerate(w, start=1):
                row[f"omega0{j}"] = val
            rows.append(row)
    return rows


def design_params(ECr_over_EJa, EJl_over_EJa, E_Ja=6.0, d=6, plasma=PLASMA_GHZ):
    """Circuit with every junction family on the plasma-frequency constraint sqrt(8 EJ EC) = plasma."""
    E_Cr = ECr_over_EJa * E_Ja
    E_Jl = EJl_over_EJa * E_Ja
    return CircuitParams(
        E_Jr=plasma**2 / (8 * E_Cr),
        E_Cr=E_Cr,
        E_Ja=E_Ja,
        E_Ca=plasma**2 / (8 * E_Ja),
        E_Jl=E_Jl,
        E_Cl=plasma**2 / (8 * E_Jl),
        d=d,
    )


def design_map(ECr_over_EJa_grid, EJl_over_EJa_grid, d=6, threshold=1e-6, tol=1e-10, seed=0):
    rows = []
    for x in np.atleast_1d(np.asarray(ECr_over_EJa_grid, dtype=float)):
        for yv in np.atleast_1d(np.asarray(EJl_over_EJa_grid, dtype=float)):
            p = design_params(float(x), float(yv), d=d)
            row = {"ECr_over_EJa": float(x), "EJl_over_EJa": float(yv)}
            try:
                H = assemble_hamiltonian(p)
                s = spectrum(p, k=3, tol=tol, seed=seed, H=H)
                elems = protection_matrix_elements(p, s, H=H)
                row.update(omega01=s.omega01, alpha=s.alpha, symmetric=protected(elems, threshold), ok=True)
            except ss.EigensolverError as exc:
                log.warning("design point (%g, %g) failed: %s", x, yv, exc)
                row.update(omega01=float("nan"), alpha=float("nan"), symmetric=False, ok=False)
            rows.append(row)
    return rows
