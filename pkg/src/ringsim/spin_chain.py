"""Exact diagonalization of the periodic spin-1/2 ring with long-range couplings.

Basis convention: site ``m`` (1-based) is the ``m``-th Kronecker factor, so
site 1 is the most significant bit of the basis index.  The local basis is
ordered (down, up), i.e. bit value 1 means spin up / one excitation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SpinChainParams",
    "SpinOperator",
    "QubitDoublet",
    "ProtectionMetrics",
    "ParameterError",
    "CapacityError",
    "pauli",
    "site_operator",
    "build_spin_hamiltonian",
    "build_symmetry_operators",
    "ground_doublet",
    "classify_symmetries",
    "sensitivity_metrics",
    "protection_point",
    "sweep_protection_map",
    "SWEEP_COLUMNS",
]

DENSE_CAP = 16384
DEGENERACY_RTOL = 1e-8

SWEEP_COLUMNS = ("zeta", "lambda", "gap", "R", "D", "flag_T", "flag_I", "flag_N", "n0", "n1", "iota0", "iota1")


class ParameterError(ValueError):
    pass


class CapacityError(ValueError):
    pass


# local (down, up) basis
_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, 1j], [-1j, 0]], dtype=complex),
    "z": np.array([[-1, 0], [0, 1]], dtype=complex),
    "+": np.array([[0, 0], [1, 0]], dtype=complex),
    "-": np.array([[0, 1], [0, 0]], dtype=complex),
}


def pauli(w):
    return _PAULI[w].copy()


@dataclass(frozen=True)
class SpinChainParams:
    M: int = 6
    t: float = 1.0
    lam: float = 0.0
    zeta: float = 0.0

    def validate(self):
        if self.M < 4 or self.M % 2:
            raise ParameterError(f"M must be even and >= 4, got {self.M}")
        if 2**self.M > DENSE_CAP:
            raise ParameterError(f"2^M = {2**self.M} exceeds the dense cap {DENSE_CAP}")
        return self


@dataclass
class SpinOperator:
    label: str
    matrix: sp.csr_matrix

    @property
    def dim(self):
        return self.matrix.shape[0]

    def dense(self):
        return self.matrix.toarray()

    def __matmul__(self, other):
        if isinstance(other, SpinOperator):
            return SpinOperator(f"{self.label}*{other.label}", (self.matrix @ other.matrix).tocsr())
        return self.matrix @ other


@dataclass
class QubitDoublet:
    E0: float
    E1: float
    state0: np.ndarray
    state1: np.ndarray
    spectrum: np.ndarray = field(repr=False, default=None)
    degenerate: bool = False
    manifold_size: int = 1  # multiplicity of the E1 level
    isolated: bool = True  # no third state degenerate with the doublet

    @property
    def gap(self):
        return self.E1 - self.E0

    @property
    def third_gap(self):
        """Distance from the doublet to the next level."""
        if self.spectrum is None or len(self.spectrum) < 3:
            return float("nan")
        return float(self.spectrum[2] - self.E1)


@dataclass
class ProtectionMetrics:
    R: float = float("nan")
    D: float = float("nan")
    n0: float = float("nan")
    n1: float = float("nan")
    tau0: complex = complex("nan")
    tau1: complex = complex("nan")
    iota0: float = float("nan")
    iota1: float = float("nan")
    flag_N: bool = False
    flag_T: bool = False
    flag_I: bool = False

    @property
    def protected(self):
        return self.flag_N and self.flag_T and self.flag_I


def _check_M(M):
    if M < 4 or M % 2:
        raise ParameterError(f"M must be even and >= 4, got {M}")
    if 2**M > DENSE_CAP:
        raise ParameterError(f"2^M = {2**M} exceeds the dense cap {DENSE_CAP}")


def site_operator(M, m, w):
    """Pauli ``w`` in {x, y, z, +, -} acting on site ``m`` (1-based) of an M-site ring."""
    m = (m - 1) % M + 1
    left = sp.identity(2 ** (m - 1), dtype=complex, format="csr")
    right = sp.identity(2 ** (M - m), dtype=complex, format="csr")
    return sp.kron(sp.kron(left, sp.csr_matrix(_PAULI[w])), right, format="csr")


def _bits(M):
    idx = np.arange(2**M)
    # column j holds the occupation of site j+1
    return (idx[:, None] >> (M - 1 - np.arange(M))[None, :]) & 1


def _index(bits):
    M = bits.shape[1]
    return (bits << (M - 1 - np.arange(M))[None, :]).sum(axis=1)


def build_spin_hamiltonian(p: SpinChainParams) -> SpinOperator:
    """Chain Hamiltonian with the zeta double sum taken literally (m = n included).

    The flip-flop sums run over every site with periodic wraparound; the
    range-M/2 sum therefore visits each diametric pair twice.
    """
    p.validate()
    M = p.M
    dim = 2**M
    bits = _bits(M)
    sz_total = (2 * bits - 1).sum(axis=1)
    diag = p.zeta / 4.0 * sz_total.astype(float) ** 2

    rows, cols, vals = [np.arange(dim)], [np.arange(dim)], [diag]

    def flip_flop(m, n, amp):
        # sigma+_m sigma-_n + sigma-_m sigma+_n moves an excitation between m and n
        if amp == 0.0:
            return
        src = np.nonzero(bits[:, m] != bits[:, n])[0]
        dst_bits = bits[src].copy()
        dst_bits[:, [m, n]] = dst_bits[:, [n, m]]
        rows.append(_index(dst_bits))
        cols.append(src)
        vals.append(np.full(src.size, amp))

    for m in range(M):
        flip_flop(m, (m + 1) % M, p.t / 2.0)
        flip_flop(m, (m + M // 2) % M, p.lam / 2.0)
    mat = sp.csr_matrix(
        (np.concatenate(vals).astype(complex), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    )
    mat.sum_duplicates()
    return SpinOperator("H", mat)


def build_symmetry_operators(M):
    """Return ``{"N": ..., "T": ..., "I": ...}`` for an M-site ring.

    T maps the configuration s to s' with s'_{m+1} = s_m, so that
    T sigma_m T^-1 = sigma_{m+1}; I maps s to s' with s'_{M+1-m} = s_m.
    """
    _check_M(M)
    dim = 2**M
    bits = _bits(M)
    N = sp.diags(bits.sum(axis=1).astype(complex), format="csr")
    shifted = np.roll(bits, 1, axis=1)
    T = sp.csr_matrix((np.ones(dim, dtype=complex), (_index(shifted), np.arange(dim))), shape=(dim, dim))
    inverted = bits[:, ::-1]
    I = sp.csr_matrix((np.ones(dim, dtype=complex), (_index(inverted), np.arange(dim))), shape=(dim, dim))
    return {"N": SpinOperator("N", N), "T": SpinOperator("T", T), "I": SpinOperator("I", I)}


def _clusters(values, rtol):
    scale = max(1.0, float(np.max(np.abs(values))))
    groups, start = [], 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[i - 1] > rtol * scale:
            groups.append((start, i))
            start = i
    return groups


def ground_doublet(H, degeneracy_tol=DEGENERACY_RTOL, inversion=None) -> QubitDoublet:
    """Two lowest eigenpairs of a spin Hamiltonian by dense diagonalization.

    If the two lowest levels are degenerate within ``degeneracy_tol``
    (relative), the pair is rotated into the eigenbasis of the inversion
    operator so symmetry labels are well defined.
    """
    mat = H.matrix if isinstance(H, SpinOperator) else H
    dim = mat.shape[0]
    if dim > DENSE_CAP:
        raise CapacityError(f"dimension {dim} exceeds the dense cap {DENSE_CAP}")
    dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat)
    if np.abs(dense - dense.conj().T).max() > 1e-12 * max(1.0, np.abs(dense).max()):
        raise ParameterError("Hamiltonian is not Hermitian")
    w, v = np.linalg.eigh(dense)
    groups = _clusters(w, degeneracy_tol)
    start1, end1 = next((a, b) for a, b in groups if a <= 1 < b)
    s0, s1 = v[:, 0].copy(), v[:, 1].copy()
    degenerate = groups[0][1] >= 2
    if degenerate and groups[0][1] == 2:
        if inversion is None:
            M = int(round(np.log2(dim)))
            inversion = build_symmetry_operators(M)["I"]
        basis = v[:, :2]
        Ired = basis.conj().T @ (inversion.matrix @ basis)
        iv, iu = np.linalg.eigh((Ired + Ired.conj().T) / 2)
        rotated = basis @ iu[:, ::-1]  # +1 eigenvector first
        s0, s1 = rotated[:, 0], rotated[:, 1]
    return QubitDoublet(
        float(w[0]), float(w[1]), s0, s1, spectrum=w, degenerate=degenerate,
        manifold_size=end1 - start1, isolated=end1 == 2,
    )


def _eigen_label(op, psi):
    v = op.matrix @ psi
    o = np.vdot(psi, v)
    res = float(np.linalg.norm(v - o * psi))
    return o, res


def classify_symmetries(d: QubitDoublet, ops, tol=1e-8) -> ProtectionMetrics:
    """Symmetry eigenvalues of both doublet states and which relations hold.

    When the first excited level is itself degenerate the excited state is
    solver-arbitrary, so no relation is flagged.
    """
    pm = ProtectionMetrics()
    n0, rn0 = _eigen_label(ops["N"], d.state0)
    n1, rn1 = _eigen_label(ops["N"], d.state1)
    t0, rt0 = _eigen_label(ops["T"], d.state0)
    t1, rt1 = _eigen_label(ops["T"], d.state1)
    i0, ri0 = _eigen_label(ops["I"], d.state0)
    i1, ri1 = _eigen_label(ops["I"], d.state1)
    pm.n0, pm.n1 = float(n0.real), float(n1.real)
    pm.tau0, pm.tau1 = complex(t0), complex(t1)
    pm.iota0, pm.iota1 = float(i0.real), float(i1.real)
    if not d.isolated:
        return pm
    pm.flag_N = bool(rn0 < tol and rn1 < tol and abs(n0 - n1) < tol)
    pm.flag_T = bool(rt0 < tol and rt1 < tol and abs(t0 - 1) < tol and abs(t1 - 1) < tol)
    pm.flag_I = bool(ri0 < tol and ri1 < tol and abs(i0 + i1) < tol and abs(abs(i0) - 1) < tol)
    return pm


def sensitivity_metrics(d: QubitDoublet, metrics: ProtectionMetrics | None = None, sites=None):
    """Relaxation (R) and dephasing (D) sensitivities, maximized over sites."""
    pm = metrics if metrics is not None else ProtectionMetrics()
    dim = d.state0.shape[0]
    M = int(round(np.log2(dim)))
    sites = range(1, M + 1) if sites is None else sites
    R = D = 0.0
    for m in sites:
        r2 = d2 = 0.0
        for w in "xyz":
            op = site_operator(M, m, w)
            a0 = op @ d.state0
            a1 = op @ d.state1
            r2 += abs(np.vdot(d.state1, a0)) ** 2
            d2 += abs(np.vdot(d.state1, a1) - np.vdot(d.state0, a0)) ** 2
        R = max(R, np.sqrt(r2))
        D = max(D, np.sqrt(d2))
    pm.R, pm.D = float(R), float(D)
    return pm


def protection_point(p: SpinChainParams, ops=None, tol=1e-8):
    """Doublet, symmetry labels and sensitivities at one parameter point."""
    ops = ops if ops is not None else build_symmetry_operators(p.M)
    d = ground_doublet(build_spin_hamiltonian(p), inversion=ops["I"])
    pm = classify_symmetries(d, ops, tol)
    sensitivity_metrics(d, pm)
    return d, pm


def sweep_protection_map(p0: SpinChainParams, zeta_grid, lambda_grid, tol=1e-8):
    """One row per (zeta, lambda) point; zeta varies slowest."""
    ops = build_symmetry_operators(p0.M)
    rows = []
    for z in np.asarray(zeta_grid, dtype=float):
        for lam in np.asarray(lambda_grid, dtype=float):
            p = SpinChainParams(M=p0.M, t=p0.t, lam=float(lam), zeta=float(z))
            d, pm = protection_point(p, ops, tol)
            rows.append(
                {
                    "zeta": float(z),
                    "lambda": float(lam),
                    "gap": d.gap,
                    "R": pm.R,
                    "D": pm.D,
                    "flag_T": pm.flag_T,
                    "flag_I": pm.flag_I,
                    "flag_N": pm.flag_N,
                    "n0": pm.n0,
                    "n1": pm.n1,
                    "iota0": pm.iota0,
                    "iota1": pm.iota1,
                }
            )
    return rows
