"""Pure dephasing from slow 1/f parameter noise.

Pipeline: sample noise traces from a piecewise 1/f spectrum by inverse DFT,
expand the qubit gap to second order in the noisy parameters, integrate the
gap fluctuation into a phase for every trajectory, and average
exp(-i phase) over the ensemble.  T_phi is the 1/e time of |f_phi|.

Units: the response surface is in GHz per parameter unit; times in seconds.
Gate-charge channels use Cooper pairs (2e) as the parameter unit, flux
channels use Phi0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import circuit as cm
from . import sparse_spectra as ss

__all__ = [
    "PSDSpec",
    "NoiseTrace",
    "NoiseChannel",
    "NoiseChannelSet",
    "ResponseSurface",
    "CoherenceCurve",
    "DephasingTime",
    "SamplingPreset",
    "PRESETS",
    "GHZ_TO_RAD_PER_S",
    "psd_value",
    "parseval_variance",
    "sample_noise",
    "charge_channels",
    "flux_channels",
    "perturb",
    "fit_response_surface",
    "gap_shift",
    "accumulate_phase",
    "coherence_curve",
    "dephasing_time",
    "simulate_dephasing",
]

log = logging.getLogger(__name__)

GHZ_TO_RAD_PER_S = 2 * np.pi * 1e9

A_CHARGE_E2 = (2e-4) ** 2  # total charge-noise power at 1 Hz, e^2/Hz
A_FLUX = (2e-6) ** 2  # total flux-noise power at 1 Hz, Phi0^2/Hz


@dataclass(frozen=True)
class PSDSpec:
    A: float
    f_IR: float = 1.0
    f_UV: float = 1.0e6

    def __post_init__(self):
        if not 0 < self.f_IR < self.f_UV:
            raise ValueError(f"need 0 < f_IR < f_UV, got {self.f_IR}, {self.f_UV}")
        if self.A < 0:
            raise ValueError("A must be non-negative")


@dataclass(frozen=True)
class SamplingPreset:
    name: str
    N: int
    delta_f: float
    n_trajectories: int = 400
    d_fit: int = 6

    @property
    def dt(self):
        return 1.0 / (self.N * self.delta_f)


PRESETS = {
    "full": SamplingPreset("full", N=2_000_000 - 1, delta_f=0.5, d_fit=8),
    "desk": SamplingPreset("desk", N=200_000 - 1, delta_f=5.0, d_fit=6),
}


def psd_value(s: PSDSpec, f):
    """Two-sided piecewise spectrum: flat below f_IR, A/|f| up to f_UV, zero above."""
    af = np.abs(np.asarray(f, dtype=float))
    out = np.where(af < s.f_IR, s.A, s.A / np.where(af > 0, af, 1.0))
    return np.where(af >= s.f_UV, 0.0, out)


def parseval_variance(s: PSDSpec, N, delta_f):
    """Expected variance of a trace: S(0) df + 2 sum_{k>=1} S(f_k) df."""
    k = np.arange(1, (N - 1) // 2 + 1)
    return float(psd_value(s, 0.0) * delta_f + 2 * np.sum(psd_value(s, k * delta_f)) * delta_f)


@dataclass
class NoiseTrace:
    samples: np.ndarray
    dt: float
    seed: object = None

    @property
    def times(self):
        return np.arange(self.samples.size) * self.dt


def sample_noise(s: PSDSpec, N, delta_f, seed=None, rng=None) -> NoiseTrace:
    """One real noise record by inverse DFT of random Fourier amplitudes.

    Components X_k = Z_k sqrt(S(f_k) df) with Z_k standard complex normal for
    k >= 1, Z_{-k} = conj(Z_k), and a real standard normal Z_0.
    """
    if N % 2 == 0 or N < 3:
        raise ValueError(f"N must be odd and >= 3, got {N}")
    rng = rng if rng is not None else np.random.default_rng(seed)
    half = (N - 1) // 2
    k = np.arange(1, half + 1)
    amp = np.sqrt(psd_value(s, k * delta_f) * delta_f)
    z = (rng.standard_normal(half) + 1j * rng.standard_normal(half)) / np.sqrt(2)
    spectrum = np.zeros(N, dtype=complex)
    spectrum[0] = rng.standard_normal() * np.sqrt(psd_value(s, 0.0) * delta_f)
    spectrum[1 : half + 1] = z * amp
    spectrum[N - half :] = np.conj(z * amp)[::-1]
    x = N * np.fft.ifft(spectrum)
    rms = np.sqrt(np.mean(x.real**2))
    if rms > 0 and np.max(np.abs(x.imag)) > 1e-10 * rms:
        raise RuntimeError("synthesized trace is not real")
    return NoiseTrace(x.real.copy(), 1.0 / (N * delta_f), seed)


@dataclass(frozen=True)
class NoiseChannel:
    label: str
    kind: str  # "gate", "inner" or "outer"
    index: int  # 0-based gate / loop index
    psd: PSDSpec


@dataclass
class NoiseChannelSet:
    channels: list
    rule: str = ""

    @property
    def labels(self):
        return [c.label for c in self.channels]

    @property
    def total_A(self):
        return sum(c.psd.A for c in self.channels)

    def __len__(self):
        return len(self.channels)

    def __iter__(self):
        return iter(self.channels)


def charge_channels(A_total_e2=A_CHARGE_E2, f_IR=1.0, f_UV=1e6):
    """Six independent gate channels sharing the total charge-noise power evenly.

    The power is specified in e^2 and converted to Cooper-pair units
    (delta Ng = delta q / 2e), i.e. divided by 4.
    """
    A = A_total_e2 / 4.0 / cm.N_NODES
    chans = [NoiseChannel(f"Ng{m + 1}", "gate", m, PSDSpec(A, f_IR, f_UV)) for m in range(cm.N_NODES)]
    return NoiseChannelSet(chans, rule=f"A_total={A_total_e2:g} e^2 over 6 gates, Cooper-pair units")


def flux_channels(A_total=A_FLUX, f_IR=1.0, f_UV=1e6):
    """Nine independent loop channels (6 inner sectors, 3 outer loops)."""
    A = A_total / 9.0
    chans = [NoiseChannel(f"PhiI{m + 1}", "inner", m, PSDSpec(A, f_IR, f_UV)) for m in range(6)]
    chans += [NoiseChannel(f"PhiO{m + 1}", "outer", m, PSDSpec(A, f_IR, f_UV)) for m in range(3)]
    return NoiseChannelSet(chans, rule=f"A_total={A_total:g} Phi0^2 over 9 loops")


def perturb(p: cm.CircuitParams, channels, x):
    """Circuit parameters shifted by ``x[i]`` along channel ``i``."""
    Ng, PI, PO = list(p.Ng), list(p.Phi_I), list(p.Phi_O)
    for c, dx in zip(channels, x):
        if dx == 0:
            continue
        if c.kind == "gate":
            Ng[c.index] += dx
        elif c.kind == "inner":
            PI[c.index] += dx
        elif c.kind == "outer":
            PO[c.index] += dx
        else:
            raise ValueError(f"unknown channel kind {c.kind!r}")
    return p.with_(Ng=tuple(Ng), Phi_I=tuple(PI), Phi_O=tuple(PO))


@dataclass
class ResponseSurface:
    omega_ref: float
    labels: list
    D_x: np.ndarray
    D_xx: np.ndarray
    steps: np.ndarray = None
    d_fit: int = 0
    richardson: np.ndarray = None  # D_xx diagonal at half step
    asymmetry: float = 0.0
    n_solves: int = 0
    meta: dict = field(default_factory=dict)

    def scaled(self, first=1.0, second=1.0):
        return ResponseSurface(self.omega_ref, list(self.labels), self.D_x * first, self.D_xx * second,
                               self.steps, self.d_fit)

    def to_dict(self):
        return {
            "omega_ref_GHz": self.omega_ref,
            "labels": list(self.labels),
            "D_x": [float(v) for v in self.D_x],
            "D_xx": [[float(v) for v in row] for row in self.D_xx],
            "steps": None if self.steps is None else [float(v) for v in self.steps],
            "d_fit": self.d_fit,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            float(data["omega_ref_GHz"]),
            list(data["labels"]),
            np.asarray(data["D_x"], float),
            np.asarray(data["D_xx"], float),
            None if data.get("steps") is None else np.asarray(data["steps"], float),
            int(data.get("d_fit", 0)),
        )


class _GapEvaluator:
    """omega01 at perturbed parameters, warm-started from the reference doublet."""

    def __init__(self, p, channels, tol, seed):
        self.p = p
        self.channels = list(channels)
        self.tol = tol
        self.seed = seed
        ref = cm.spectrum(p, k=3, tol=tol, seed=seed)
        self.ref = ref
        rng = np.random.default_rng(seed)
        v = ref.vectors[:, 0] + ref.vectors[:, 1] + ref.vectors[:, 2]
        noise = rng.standard_normal(v.size)
        self.v0 = v / np.linalg.norm(v) + 1e-3 * noise / np.linalg.norm(noise)
        self.count = 0

    def __call__(self, x):
        q = perturb(self.p, self.channels, x)
        H = cm.assemble_hamiltonian(q)
        v0 = self.v0 if H.dtype.kind == "c" else self.v0.real
        res = ss.lowest_k(H, 2, tol=self.tol, seed=self.seed, v0=v0, complete_clusters=False)
        self.count += 1
        return float(res.values[1] - res.values[0])


def fit_response_surface(p: cm.CircuitParams, channels, steps=None, d_fit=6, tol=1e-12, seed=0,
                         richardson=True, cross_terms=True) -> ResponseSurface:
    """First and second derivatives of omega01 by central finite differences.

    D_x uses the two-point central stencil, diagonal D_xx the three-point
    stencil and off-diagonal D_xx the four-point stencil.  With
    ``richardson`` the diagonal is re-evaluated at half step as a check.
    Default steps: 1e-3 Cooper pairs for gates, 1e-5 Phi0 for loops.
    """
    channels = list(channels)
    c = len(channels)
    if steps is None:
        steps = np.array([1e-3 if ch.kind == "gate" else 1e-5 for ch in channels])
    steps = np.broadcast_to(np.asarray(steps, dtype=float), (c,)).copy()
    q = p.with_(d=d_fit)
    f = _GapEvaluator(q, channels, tol, seed)
    f0 = f(np.zeros(c))
    D_x = np.zeros(c)
    D_xx = np.zeros((c, c))
    plus = np.zeros(c)
    minus = np.zeros(c)
    for i in range(c):
        e = np.zeros(c)
        e[i] = steps[i]
        plus[i], minus[i] = f(e), f(-e)
        D_x[i] = (plus[i] - minus[i]) / (2 * steps[i])
        D_xx[i, i] = (plus[i] - 2 * f0 + minus[i]) / steps[i] ** 2
    half = None
    if richardson:
        half = np.zeros(c)
        for i in range(c):
            e = np.zeros(c)
            e[i] = steps[i] / 2
            half[i] = (f(e) - 2 * f0 + f(-e)) / (steps[i] / 2) ** 2
    if cross_terms:
        for i in range(c):
            for j in range(i + 1, c):
                vals = {}
                for si in (1, -1):
                    for sj in (1, -1):
                        e = np.zeros(c)
                        e[i], e[j] = si * steps[i], sj * steps[j]
                        vals[si, sj] = f(e)
                D_xx[i, j] = (vals[1, 1] - vals[1, -1] - vals[-1, 1] + vals[-1, -1]) / (4 * steps[i] * steps[j])
                D_xx[j, i] = D_xx[i, j]
    asym = float(np.max(np.abs(D_xx - D_xx.T))) if c else 0.0
    return ResponseSurface(
        omega_ref=f0,
        labels=[ch.label for ch in channels],
        D_x=D_x,
        D_xx=D_xx,
        steps=steps,
        d_fit=d_fit,
        richardson=half,
        asymmetry=asym,
        n_solves=f.count,
        meta={"tol": tol, "seed": seed},
    )


def gap_shift(rs: ResponseSurface, x):
    """delta omega01 (GHz) for channel offsets ``x`` of shape (channels, times)."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != len(rs.D_x):
        raise ValueError(f"got {x.shape[0]} channel traces for {len(rs.D_x)} channels")
    first = rs.D_x @ x
    second = 0.5 * np.einsum("it,ij,jt->t", x, rs.D_xx, x) if x.ndim == 2 else 0.5 * x @ rs.D_xx @ x
    return first + second


def accumulate_phase(traces, rs: ResponseSurface, dt):
    """phi(t_l) = integral of 2 pi delta omega01 by cumulative trapezoid (radians)."""
    delta = gap_shift(rs, traces) * GHZ_TO_RAD_PER_S
    return cumulative_trapezoid(delta, dx=dt, initial=0.0)


@dataclass
class CoherenceCurve:
    t: np.ndarray
    f: np.ndarray  # complex ensemble average of exp(-i phi)
    err: np.ndarray  # bootstrap std of |f|
    n: int
    channels: list = field(default_factory=list)

    @property
    def abs_f(self):
        return np.abs(self.f)


def coherence_curve(phases, t=None, n_boot=200, seed=0, channels=()) -> CoherenceCurve:
    """Ensemble mean of exp(-i phi) with bootstrap error bars on its modulus."""
    phases = np.atleast_2d(np.asarray(phases, dtype=float))
    n = phases.shape[0]
    if n < 2:
        raise ValueError("need at least two trajectories")
    z = np.exp(-1j * phases)
    f = z.mean(axis=0)
    rng = np.random.default_rng(seed)
    boot = np.empty((n_boot, z.shape[1]))
    for b in range(n_boot):
        idx = rng.integers(0, n, n)
        boot[b] = np.abs(z[idx].mean(axis=0))
    t = np.arange(z.shape[1], dtype=float) if t is None else np.asarray(t, dtype=float)
    return CoherenceCurve(t, f, boot.std(axis=0), n, list(channels))


@dataclass
class DephasingTime:
    T_phi: float
    lower_bound: bool = False


def dephasing_time(c: CoherenceCurve) -> DephasingTime:
    """First 1/e crossing of |f_phi|, linearly interpolated between samples."""
    a = c.abs_f
    target = np.exp(-1.0)
    below = np.nonzero(a < target)[0]
    if below.size == 0:
        return DephasingTime(float(c.t[-1]), lower_bound=True)
    i = int(below[0])
    if i == 0:
        return DephasingTime(float(c.t[0]))
    t0, t1, a0, a1 = c.t[i - 1], c.t[i], a[i - 1], a[i]
    return DephasingTime(float(t0 + (a0 - target) * (t1 - t0) / (a0 - a1)))


def simulate_dephasing(rs: ResponseSurface, channels, preset: SamplingPreset | str = "desk", n_trajectories=None,
                       seed=0, max_points=4000, t_max=None, n_boot=200):
    """Monte Carlo coherence curve and T_phi for one channel set.

    Each (trajectory, channel) pair draws from its own generator seeded by
    ``(seed, trajectory, channel)``, so results do not depend on ordering.
    Phases are kept on a decimated time grid of at most ``max_points`` samples
    spanning ``t_max`` (default: the whole record).
    """
    preset = PRESETS[preset] if isinstance(preset, str) else preset
    channels = list(channels)
    n_traj = n_trajectories or preset.n_trajectories
    N, df = preset.N, preset.delta_f
    dt = 1.0 / (N * df)
    n_keep = N if t_max is None else min(N, int(np.ceil(t_max / dt)) + 1)
    stride = max(1, int(np.ceil(n_keep / max_points)))
    idx = np.arange(0, n_keep, stride)
    phases = np.empty((n_traj, idx.size))
    for j in range(n_traj):
        traces = np.empty((len(channels), n_keep))
        for i, ch in enumerate(channels):
            rng = np.random.default_rng([seed, j, i])
            traces[i] = sample_noise(ch.psd, N, df, rng=rng).samples[:n_keep]
        phases[j] = accumulate_phase(traces, rs, dt)[idx]
    curve = coherence_curve(phases, t=idx * dt, n_boot=n_boot, seed=seed, channels=[c.label for c in channels])
    return curve, dephasing_time(curve)
